use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha1::{Digest as _, Sha1};

use super::*;
use crate::codec::{encode, AuthRequest, MessageKind, Plaintext, ProtocolMessage};
use crate::crypto::{FreshnessWindow, Staleness, Timestamp32};

// Byte-level oracle, independent of BitString: XOR right-aligns the shorter
// operand, then SHA-1 over the bytes.
fn oracle_xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    let n = a.len().max(b.len());
    let pad = |v: &[u8]| {
        let mut out = vec![0u8; n - v.len()];
        out.extend_from_slice(v);
        out
    };
    pad(a).iter().zip(pad(b)).map(|(x, y)| x ^ y).collect()
}

fn oracle_h(bytes: &[u8]) -> [u8; 20] {
    Sha1::digest(bytes).into()
}

fn oracle_key(bytes: &[u8]) -> [u8; 16] {
    oracle_h(bytes)[..16].try_into().unwrap()
}

const GW: Identity = Identity(0x0000_0100);
const MD: Identity = Identity(0x1000_0001);
const UI: Identity = Identity(0x2000_0001);
const SN: Identity = Identity(0x3000_0001);

struct World {
    gw: Gateway,
    md: ExpertDevice,
    mobile: MobileDevice,
    sensor: SensorNode,
    rng: ChaCha8Rng,
}

fn world(seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gw = Gateway::new(GW, FreshnessWindow::default());
    let md = ExpertDevice::enroll(&mut gw, MD, &Password::from("pw-1"), &mut rng).unwrap();
    let mut mobile = MobileDevice::enroll(&mut gw, UI).unwrap();
    let sensor = SensorNode::enroll(&mut gw, &mut mobile, SN).unwrap();
    World { gw, md, mobile, sensor, rng }
}

fn t(s: u32) -> Timestamp32 {
    Timestamp32(s)
}

fn honest(w: &mut World) -> (SessionKey, SessionKey) {
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(100), &mut w.rng).unwrap();
    let m2 = w.gw.handle_auth(&m1, t(101)).unwrap();
    let m3 = w.mobile.forward(&m2, t(102)).unwrap();
    let (m4, ks) = w.sensor.handle(&m3, t(103)).unwrap();
    let ke = w.md.finish(&m4, t(104)).unwrap();
    (ke, ks)
}

#[test]
fn honest_run_agrees_on_key() {
    let mut w = world(1);
    let (ke, ks) = honest(&mut w);
    assert_eq!(ke, ks);
    assert_eq!(w.sensor.session(), Some(&ks));
    assert!(w.md.pending().is_none());
}

#[test]
fn session_key_matches_oracle() {
    let mut w = world(2);
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(10), &mut w.rng).unwrap();
    let nonce = w.md.pending().unwrap().nonce;
    let m2 = w.gw.handle_auth(&m1, t(10)).unwrap();
    let m3 = w.mobile.forward(&m2, t(10)).unwrap();
    let (_, key) = w.sensor.handle(&m3, t(10)).unwrap();

    let ids = oracle_xor(&MD.0.to_be_bytes(), &SN.0.to_be_bytes());
    let digest = oracle_h(&oracle_xor(&ids, &nonce.0.to_be_bytes()));
    assert_eq!(key.digest.0, digest);
    assert_eq!(key.cipher_key.0[..], digest[..16]);
}

#[test]
fn registration_keys_match_oracle() {
    let w = world(3);
    let gw = GW.0.to_be_bytes();
    let ui = UI.0.to_be_bytes();
    let sn = SN.0.to_be_bytes();
    assert_eq!(w.mobile.k_gw_u().0, oracle_key(&oracle_xor(&ui, &gw)));
    let rec = w.gw.sensor(SN).unwrap();
    assert_eq!(rec.k_u_snj.0, oracle_key(&oracle_xor(&ui, &sn)));
    assert_eq!(rec.k_gw_snj.0, oracle_key(&oracle_xor(&gw, &sn)));
    assert_eq!(rec.owner, UI);
}

#[test]
fn verifier_matches_oracle() {
    let w = world(4);
    let pw = oracle_h(b"pw-1");
    let epw = oracle_h(&oracle_xor(&pw, &w.md.salt().0));
    let n_i = oracle_h(&oracle_xor(&oracle_xor(&MD.0.to_be_bytes(), &epw), &w.md.keys().s_key.0));
    assert_eq!(w.md.n_i().0, n_i);
    assert_eq!(w.gw.expert_by_credential(&w.md.credential()).unwrap().n_i, w.md.n_i());
}

#[test]
fn credential_lookup_returns_issued_keys() {
    let w = world(5);
    let rec = w.gw.expert_by_credential(&w.md.credential()).unwrap();
    assert_eq!(rec.m_id, MD);
    assert_eq!(&rec.keys, w.md.keys());
}

#[test]
fn thousand_registrations_are_distinct() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut gw = Gateway::new(GW, FreshnessWindow::default());
    let mut creds = BTreeSet::new();
    let mut mobile_keys = BTreeSet::new();
    for i in 0..1000 {
        let dev = ExpertDevice::enroll(&mut gw, Identity(0x1000_0000 + i), &Password::from("x"), &mut rng).unwrap();
        creds.insert(dev.credential());
        mobile_keys.insert(gw.register_mobile(Identity(0x2000_0000 + i)).unwrap().k_gw_u);
    }
    assert_eq!(creds.len(), 1000);
    assert_eq!(mobile_keys.len(), 1000);
}

#[test]
fn duplicate_registrations_are_refused() {
    let mut w = world(7);
    let again = ExpertDevice::enroll(&mut w.gw, MD, &Password::from("pw-1"), &mut w.rng);
    assert_eq!(again.unwrap_err(), ProtocolError::AlreadyRegistered(MD));
    assert_eq!(w.gw.register_mobile(UI).unwrap_err(), ProtocolError::AlreadyRegistered(UI));
    assert_eq!(w.gw.register_sensor(UI, SN).unwrap_err(), ProtocolError::AlreadyRegistered(SN));
    let stray = Identity(0x2000_00ff);
    assert_eq!(w.gw.register_sensor(stray, Identity(9)).unwrap_err(), ProtocolError::UnknownMobile(stray));
}

#[test]
fn mobile_never_holds_gateway_sensor_key() {
    let w = world(8);
    let rec = w.gw.sensor(SN).unwrap();
    let held = w.mobile.held_keys();
    assert!(held.contains(&rec.k_u_snj));
    assert!(!held.contains(&rec.k_gw_snj));
    assert!(!held.contains(&w.md.keys().k_l));
    assert!(!held.contains(&w.md.keys().k_j));
}

#[test]
fn login_rejects_wrong_inputs() {
    let mut w = world(9);
    for i in 0..50 {
        let wrong = Password::new(format!("guess-{i}-{}", w.rng.gen::<u32>()));
        assert_eq!(w.md.login(MD, &wrong), Err(ProtocolError::LoginRejected));
    }
    assert_eq!(w.md.login(Identity(MD.0 ^ 1), &Password::from("pw-1")), Err(ProtocolError::LoginRejected));
    assert!(!w.md.is_logged_in());
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    assert!(w.md.is_logged_in());
}

#[test]
fn start_auth_requires_login_and_is_672_bits() {
    let mut w = world(10);
    assert_eq!(w.md.start_auth(UI, SN, t(0), &mut w.rng), Err(ProtocolError::NotAuthenticated));
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let a = w.md.start_auth(UI, SN, t(0), &mut w.rng).unwrap();
    assert_eq!(encode(&a.clone().into()).unwrap().len(), 672);
    assert!(matches!(w.md.start_auth(UI, SN, t(0), &mut w.rng), Err(ProtocolError::ProtocolViolation(_))));
    w.md.abandon();
    let b = w.md.start_auth(UI, SN, t(0), &mut w.rng).unwrap();
    assert_ne!(a.cid, b.cid);
}

#[test]
fn hop_sizes_match_reference() {
    let mut w = world(11);
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(0), &mut w.rng).unwrap();
    let m2 = w.gw.handle_auth(&m1, t(0)).unwrap();
    let m3 = w.mobile.forward(&m2, t(0)).unwrap();
    let (m4, _) = w.sensor.handle(&m3, t(0)).unwrap();
    let sizes: Vec<usize> = [
        ProtocolMessage::from(m1),
        m2.clone().into(),
        m3.clone().into(),
        m4.into(),
    ]
    .iter()
    .map(|m| encode(m).unwrap().len())
    .collect();
    assert_eq!(sizes, [672, 288, 288, 160]);
    // X travels through the mobile untouched.
    let rec = w.gw.sensor(SN).unwrap();
    let vi = crate::codec::ViPlain::from_padded(&crate::crypto::decrypt(&w.mobile.k_gw_u(), &m2.vi)).unwrap();
    let vp = crate::codec::ViPrimePlain::from_padded(&crate::crypto::decrypt(&rec.k_u_snj, &m3.vi_prime)).unwrap();
    assert_eq!(vi.x, vp.x);
}


#[test]
fn window_is_inclusive_at_every_step() {
    let mut w = world(12);
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(100), &mut w.rng).unwrap();
    assert_eq!(w.gw.clone().handle_auth(&m1, t(103)), Err(ProtocolError::Stale(Staleness::WindowExceeded)));
    let m2 = w.gw.handle_auth(&m1, t(102)).unwrap();
    assert_eq!(w.mobile.clone().forward(&m2, t(105)), Err(ProtocolError::Stale(Staleness::WindowExceeded)));
    let m3 = w.mobile.forward(&m2, t(104)).unwrap();
    assert_eq!(w.sensor.clone().handle(&m3, t(107)).unwrap_err(), ProtocolError::Stale(Staleness::WindowExceeded));
    let (m4, ks) = w.sensor.handle(&m3, t(106)).unwrap();
    assert_eq!(w.md.clone().finish(&m4, t(109)), Err(ProtocolError::Stale(Staleness::WindowExceeded)));
    assert_eq!(w.md.finish(&m4, t(108)).unwrap(), ks);
}

#[test]
fn every_step_rejects_echo_mismatch() {
    let mut w = world(13);
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(50), &mut w.rng).unwrap();
    let bad1 = AuthRequest { t1: t(51), ..m1.clone() };
    assert_eq!(w.gw.handle_auth(&bad1, t(51)), Err(ProtocolError::Stale(Staleness::EchoMismatch)));
    let m2 = w.gw.handle_auth(&m1, t(50)).unwrap();
    let bad2 = crate::codec::GatewayToMobile { t3: t(51), ..m2.clone() };
    assert_eq!(w.mobile.forward(&bad2, t(51)), Err(ProtocolError::Stale(Staleness::EchoMismatch)));
    let m3 = w.mobile.forward(&m2, t(50)).unwrap();
    let bad3 = crate::codec::MobileToSensor { t5: t(51), ..m3.clone() };
    assert_eq!(w.sensor.handle(&bad3, t(51)).unwrap_err(), ProtocolError::Stale(Staleness::EchoMismatch));
    assert!(w.sensor.session().is_none());
    let (m4, _) = w.sensor.handle(&m3, t(50)).unwrap();
    let bad4 = crate::codec::SensorToExpert { t7: t(51), ..m4 };
    assert_eq!(w.md.finish(&bad4, t(51)), Err(ProtocolError::Stale(Staleness::EchoMismatch)));
    assert!(w.md.pending().is_some());
}

#[test]
fn cid_bit_flips_are_identity_mismatches() {
    let mut w = world(14);
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(0), &mut w.rng).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1414);
    for _ in 0..100 {
        let pos = rng.gen_range(0..m1.cid.bit_len());
        let mut bits = m1.cid.to_bits();
        bits.flip(pos);
        let forged = AuthRequest { cid: crate::crypto::CipherText::from_bits(&bits).unwrap(), ..m1.clone() };
        assert_eq!(w.gw.handle_auth(&forged, t(0)), Err(ProtocolError::IdentityMismatch), "bit {pos}");
    }
    let mut c = m1.c;
    c.0[0] ^= 0x80;
    assert_eq!(w.gw.handle_auth(&AuthRequest { c, ..m1 }, t(0)), Err(ProtocolError::UnknownCredential));
}

#[test]
fn mobile_and_sensor_check_addressing() {
    let mut w = world(15);
    let other = MobileDevice::enroll(&mut w.gw, Identity(0x2000_0002)).unwrap();
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(0), &mut w.rng).unwrap();
    let m2 = w.gw.handle_auth(&m1, t(0)).unwrap();
    // A V_i sealed for this mobile opened under another mobile's key.
    let mut impostor = other;
    assert!(impostor.forward(&m2, t(0)).is_err());

    let mut second = SensorNode::enroll(&mut w.gw, &mut w.mobile, Identity(0x3000_0002)).unwrap();
    let m3 = w.mobile.forward(&m2, t(0)).unwrap();
    assert!(second.handle(&m3, t(0)).is_err());
    assert!(second.session().is_none());
}

#[test]
fn gateway_refuses_unowned_sensor() {
    let mut w = world(16);
    let mut other = MobileDevice::enroll(&mut w.gw, Identity(0x2000_0002)).unwrap();
    let foreign = Identity(0x3000_0099);
    SensorNode::enroll(&mut w.gw, &mut other, foreign).unwrap();
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, foreign, t(0), &mut w.rng).unwrap();
    assert_eq!(w.gw.handle_auth(&m1, t(0)), Err(ProtocolError::UnknownTarget));
}

#[test]
fn cross_session_l_is_identity_mismatch() {
    let mut w = world(17);
    let _ = honest(&mut w);
    // Capture an L from one session, then present it to a later one.
    w.md.login(MD, &Password::from("pw-1")).unwrap();
    let m1 = w.md.start_auth(UI, SN, t(200), &mut w.rng).unwrap();
    let m2 = w.gw.handle_auth(&m1, t(200)).unwrap();
    let m3 = w.mobile.forward(&m2, t(200)).unwrap();
    let (old_l, _) = w.sensor.handle(&m3, t(200)).unwrap();
    w.md.abandon();
    for i in 0..20 {
        let m1 = w.md.start_auth(UI, SN, t(300 + i), &mut w.rng).unwrap();
        let replay = crate::codec::SensorToExpert { t7: t(300 + i), ..old_l.clone() };
        assert_eq!(w.md.finish(&replay, t(300 + i)), Err(ProtocolError::IdentityMismatch));
        drop(m1);
        w.md.abandon();
    }
}

#[test]
fn finish_without_pending_is_violation() {
    let mut w = world(18);
    let (_, _) = honest(&mut w);
    let l = crate::codec::SensorToExpert {
        l: crate::crypto::CipherText::from_blocks(vec![[0; 16]]).unwrap(),
        t7: t(0),
    };
    assert!(matches!(w.md.finish(&l, t(0)), Err(ProtocolError::ProtocolViolation(_))));
}

#[test]
fn password_update_swaps_verifier() {
    let mut w = world(19);
    let old = Password::from("pw-1");
    let new = Password::from("pw-2");
    let before = w.md.n_i();
    assert_eq!(
        password_update(&mut w.md, &mut w.gw, MD, &Password::from("nope"), &new, &mut w.rng),
        Err(ProtocolError::LoginRejected)
    );
    assert_eq!(w.md.n_i(), before);

    password_update(&mut w.md, &mut w.gw, MD, &old, &new, &mut w.rng).unwrap();
    assert_eq!(w.md.login(MD, &old), Err(ProtocolError::LoginRejected));
    w.md.login(MD, &new).unwrap();

    let epw = oracle_h(&oracle_xor(&oracle_h(b"pw-2"), &w.md.salt().0));
    let n_i = oracle_h(&oracle_xor(&oracle_xor(&MD.0.to_be_bytes(), &epw), &w.md.keys().s_key.0));
    assert_eq!(w.md.n_i().0, n_i);
    assert_eq!(w.gw.expert_by_credential(&w.md.credential()).unwrap().n_i, w.md.n_i());
}

#[test]
fn registry_fixture_round_trip() {
    let cfg = RegistryConfig::generated(2, 3, 4);
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RegistryConfig::from_toml(&text).unwrap(), cfg);
    let reg = cfg.build(FreshnessWindow::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(reg.experts.len(), 2);
    assert_eq!(reg.mobiles.len(), 3);
    assert_eq!(reg.sensors.len(), 12);
    assert!(reg.mobiles.iter().all(|m| m.sensor_keys().len() == 4));
}

#[test]
fn registry_fixture_with_fixed_keys() {
    let text = r#"
        gateway_id = 256
        [[experts]]
        id = 268435457
        password = "pw-1"
        salt = "00112233445566778899aabbccddeeff00112233"
        keys = { k_j = "000102030405060708090a0b0c0d0e0f", k_l = "101112131415161718191a1b1c1d1e1f", s_key = "202122232425262728292a2b2c2d2e2f" }
        [[mobiles]]
        id = 536870913
        [[sensors]]
        id = 805306369
        owner = 536870913
    "#;
    let cfg = RegistryConfig::from_toml(text).unwrap();
    let a = cfg.build(FreshnessWindow::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = cfg.build(FreshnessWindow::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(a.experts[0].credential(), b.experts[0].credential());
    assert_eq!(a.experts[0].n_i(), b.experts[0].n_i());

    let bad = text.replace("owner = 536870913", "owner = 7");
    let err = RegistryConfig::from_toml(&bad).unwrap().build(FreshnessWindow::default(), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(matches!(err, Err(FixtureError::Protocol(ProtocolError::UnknownMobile(_)))));
    assert!(RegistryConfig::from_toml("gateway_id = 1\nbogus = 2").is_err());
}

#[test]
fn operation_counts_per_role() {
    let mut w = world(20);
    let (_, _) = honest(&mut w);
    use crate::metrics::OpTally;
    // Login + request on the expert, plus confirmation.
    assert_eq!(w.md.meter.tally(), OpTally::new(4, 2, 5));
    assert_eq!(w.gw.meter.tally(), OpTally::new(1, 4, 0));
    assert_eq!(w.mobile.meter.tally(), OpTally::new(0, 2, 0));
    assert_eq!(w.sensor.meter.tally(), OpTally::new(1, 3, 2));
}

#[test]
fn kinds_cover_wire_sizes() {
    let total: usize = MessageKind::ALL.iter().map(|k| k.wire_size_bits()).sum();
    assert_eq!(total, 1408);
}
