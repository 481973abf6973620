//! Adversary knowledge closure: everything computable from held keys and
//! observed wires by repeated decryption and key derivation.
//!
//! Derivation rules, applied until nothing new appears:
//!
//! * any two known identities give `derive_key(H(a xor b))`
//! * a known expert identity, sensor identity and nonce give `K_ssk`
//! * any known digest is tried as a key via `derive_key`
//! * any known identity is hashed
//!
//! A trial decryption counts as an opening only if the block padding is
//! zero and, for sealed parts travelling with a cleartext timestamp, the
//! embedded timestamp equals that companion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::codec::{
    decode, CidPlain, CredentialPlain, InnerXPlain, LPlain, MessageKind, Plaintext, ProtocolMessage, ViPlain,
    ViPrimePlain, WireBits,
};
use crate::crypto::{decrypt, derive_key, hash160, BitString, CipherText, Digest160, Key128, Timestamp32};
use crate::entities::SessionKey;
use crate::ids::{Identity, Nonce64, Role};

/// Which plaintext layout a ciphertext was observed to carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    Cid,
    Credential,
    Vi,
    ViPrime,
    InnerX,
    L,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Sealed {
    companion: Option<Timestamp32>,
    opened: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Knowledge {
    keys: BTreeSet<Key128>,
    identities: BTreeMap<Identity, BTreeSet<Role>>,
    nonces: BTreeSet<Nonce64>,
    digests: BTreeSet<Digest160>,
    times: BTreeSet<Timestamp32>,
    sealed: BTreeMap<(Schema, CipherText), Sealed>,
    rounds: usize,
}

/// Sizes of a closed knowledge set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeSummary {
    pub rounds: usize,
    pub keys: usize,
    pub identities: usize,
    pub nonces: usize,
    pub digests: usize,
    pub sealed: usize,
    pub opened: usize,
}

fn pad_is_zero(bits: &BitString, width: usize) -> bool {
    bits.slice(width..bits.len()).is_zero()
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_key(&mut self, key: Key128) {
        self.keys.insert(key);
    }

    pub fn add_identity(&mut self, id: Identity, role: Role) {
        self.identities.entry(id).or_default().insert(role);
    }

    /// Splits an observed wire into its sealed parts and cleartext fields.
    pub fn observe(&mut self, kind: MessageKind, wire: &WireBits) {
        let Ok(msg) = decode(kind, wire) else { return };
        match msg {
            ProtocolMessage::AuthRequest(m) => {
                self.times.insert(m.t1);
                self.seal(Schema::Cid, m.cid, Some(m.t1));
                self.seal(Schema::Credential, m.c.to_cipher(), None);
            }
            ProtocolMessage::GatewayToMobile(m) => {
                self.times.insert(m.t3);
                self.seal(Schema::Vi, m.vi, Some(m.t3));
            }
            ProtocolMessage::MobileToSensor(m) => {
                self.times.insert(m.t5);
                self.seal(Schema::ViPrime, m.vi_prime, Some(m.t5));
            }
            ProtocolMessage::SensorToExpert(m) => {
                self.times.insert(m.t7);
                self.seal(Schema::L, m.l, Some(m.t7));
            }
        }
    }

    fn seal(&mut self, schema: Schema, ct: CipherText, companion: Option<Timestamp32>) {
        self.sealed.entry((schema, ct)).or_insert(Sealed { companion, opened: false });
    }

    fn size(&self) -> (usize, usize, usize, usize, usize, usize) {
        let roles = self.identities.values().map(BTreeSet::len).sum();
        let opened = self.sealed.values().filter(|s| s.opened).count();
        (self.keys.len(), roles, self.nonces.len(), self.digests.len(), self.sealed.len(), opened)
    }

    fn derive(&mut self) {
        let ids: Vec<Identity> = self.identities.keys().copied().collect();
        for (i, a) in ids.iter().enumerate() {
            self.digests.insert(hash160(&a.to_bits()));
            for b in &ids[i + 1..] {
                self.keys.insert(derive_key(&hash160(&crate::crypto::xor_norm(&a.to_bits(), &b.to_bits()))));
            }
        }
        let with_role =
            |role: Role| -> Vec<Identity> { self.identities.iter().filter(|(_, r)| r.contains(&role)).map(|(i, _)| *i).collect() };
        let experts = with_role(Role::Expert);
        let sensors = with_role(Role::Sensor);
        let nonces: Vec<Nonce64> = self.nonces.iter().copied().collect();
        for m_id in &experts {
            for sn in &sensors {
                for m in &nonces {
                    let mixed = crate::crypto::xor_norm(&crate::crypto::xor_norm(&m_id.to_bits(), &sn.to_bits()), &m.to_bits());
                    self.digests.insert(hash160(&mixed));
                }
            }
        }
        let from_digests: Vec<Key128> = self.digests.iter().map(derive_key).collect();
        self.keys.extend(from_digests);
    }

    fn try_open(&mut self) {
        let keys: Vec<Key128> = self.keys.iter().copied().collect();
        let pending: Vec<(Schema, CipherText, Option<Timestamp32>)> = self
            .sealed
            .iter()
            .filter(|(_, s)| !s.opened)
            .map(|((schema, ct), s)| (*schema, ct.clone(), s.companion))
            .collect();
        for (schema, ct, companion) in pending {
            if let Some(key) = keys.iter().find(|k| self.accepts(schema, &decrypt(k, &ct), companion)) {
                let bits = decrypt(key, &ct);
                self.absorb(schema, &bits);
                self.sealed.get_mut(&(schema, ct)).expect("present").opened = true;
            }
        }
    }

    fn accepts(&self, schema: Schema, bits: &BitString, companion: Option<Timestamp32>) -> bool {
        fn echoed<P: Plaintext>(bits: &BitString, companion: Option<Timestamp32>, ts: impl Fn(&P) -> Timestamp32) -> bool {
            pad_is_zero(bits, P::WIDTH)
                && match (P::from_padded(bits), companion) {
                    (Ok(p), Some(t)) => ts(&p) == t,
                    (Ok(_), None) => true,
                    (Err(_), _) => false,
                }
        }
        match schema {
            Schema::Cid => echoed::<CidPlain>(bits, companion, |p| p.t1),
            Schema::Credential => echoed::<CredentialPlain>(bits, None, |_| Timestamp32(0)),
            Schema::Vi => echoed::<ViPlain>(bits, companion, |p| p.t3),
            Schema::ViPrime => echoed::<ViPrimePlain>(bits, companion, |p| p.t5),
            Schema::InnerX => echoed::<InnerXPlain>(bits, None, |_| Timestamp32(0)),
            Schema::L => echoed::<LPlain>(bits, companion, |p| p.t7),
        }
    }

    fn absorb(&mut self, schema: Schema, bits: &BitString) {
        match schema {
            Schema::Cid => {
                let p = CidPlain::from_padded(bits).expect("accepted");
                self.digests.insert(p.h_mid);
                self.nonces.insert(p.nonce);
                self.add_identity(p.u_i, Role::Mobile);
                self.add_identity(p.sn_j, Role::Sensor);
                self.times.insert(p.t1);
                self.seal(Schema::Credential, p.c.to_cipher(), None);
            }
            Schema::Credential => {
                let p = CredentialPlain::from_padded(bits).expect("accepted");
                self.add_identity(p.m_id, Role::Expert);
                self.add_identity(p.id_gw, Role::Gateway);
            }
            Schema::Vi => {
                let p = ViPlain::from_padded(bits).expect("accepted");
                self.add_identity(p.u_i, Role::Mobile);
                self.add_identity(p.sn_j, Role::Sensor);
                self.times.insert(p.t3);
                self.seal(Schema::InnerX, p.x.to_cipher(), None);
            }
            Schema::ViPrime => {
                let p = ViPrimePlain::from_padded(bits).expect("accepted");
                self.add_identity(p.u_i, Role::Mobile);
                self.add_identity(p.sn_j, Role::Sensor);
                self.times.insert(p.t5);
                self.seal(Schema::InnerX, p.x.to_cipher(), None);
            }
            Schema::InnerX => {
                let p = InnerXPlain::from_padded(bits).expect("accepted");
                self.add_identity(p.m_id, Role::Expert);
                self.nonces.insert(p.nonce);
            }
            Schema::L => {
                let p = LPlain::from_padded(bits).expect("accepted");
                self.add_identity(p.sn_j, Role::Sensor);
                self.add_identity(p.m_id, Role::Expert);
                self.times.insert(p.t7);
            }
        }
    }

    /// Runs the rules to a fixed point and returns the number of rounds.
    pub fn close(&mut self) -> usize {
        loop {
            let before = self.size();
            self.derive();
            self.try_open();
            self.rounds += 1;
            if self.size() == before {
                return self.rounds;
            }
        }
    }

    pub fn knows_key(&self, key: &Key128) -> bool {
        self.keys.contains(key)
    }

    pub fn knows_identity(&self, id: Identity) -> bool {
        self.identities.contains_key(&id)
    }

    pub fn knows_nonce(&self, nonce: Nonce64) -> bool {
        self.nonces.contains(&nonce)
    }

    pub fn knows_session_key(&self, key: &SessionKey) -> bool {
        self.keys.contains(&key.cipher_key) || self.digests.contains(&key.digest)
    }

    /// Opened `X` payloads, as ciphertexts. What a compromised mobile can
    /// replay even though it cannot read them.
    pub fn inner_x(&self) -> Vec<CipherText> {
        self.sealed.keys().filter(|(s, _)| *s == Schema::InnerX).map(|(_, ct)| ct.clone()).collect()
    }

    pub fn summary(&self) -> KnowledgeSummary {
        let (keys, identities, nonces, digests, sealed, opened) = self.size();
        KnowledgeSummary { rounds: self.rounds, keys, identities, nonces, digests, sealed, opened }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::codec::encode;
    use crate::crypto::FreshnessWindow;
    use crate::entities::{ExpertDevice, Gateway, MobileDevice, SensorNode};
    use crate::ids::Password;

    struct Run {
        wires: Vec<(MessageKind, WireBits)>,
        mobile: MobileDevice,
        gw: Gateway,
        m_id: Identity,
        sn_j: Identity,
        nonce: Nonce64,
        key: SessionKey,
    }

    fn run(seed: u64) -> Run {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gw = Gateway::new(Identity(0x100), FreshnessWindow::default());
        let m_id = Identity(0x1000_0000);
        let sn_j = Identity(0x3000_0000);
        let mut md = ExpertDevice::enroll(&mut gw, m_id, &Password::from("pw"), &mut rng).unwrap();
        let mut mobile = MobileDevice::enroll(&mut gw, Identity(0x2000_0000)).unwrap();
        let mut sensor = SensorNode::enroll(&mut gw, &mut mobile, sn_j).unwrap();
        let t = crate::crypto::Timestamp32(77);
        md.login(m_id, &Password::from("pw")).unwrap();
        let m1 = md.start_auth(mobile.u_i(), sn_j, t, &mut rng).unwrap();
        let nonce = md.pending().unwrap().nonce;
        let m2 = gw.handle_auth(&m1, t).unwrap();
        let m3 = mobile.forward(&m2, t).unwrap();
        let (m4, key) = sensor.handle(&m3, t).unwrap();
        let wires = [ProtocolMessage::from(m1), m2.into(), m3.into(), m4.into()]
            .iter()
            .map(|m| (m.kind(), encode(m).unwrap()))
            .collect();
        Run { wires, mobile, gw, m_id, sn_j, nonce, key }
    }

    fn mobile_view(r: &Run) -> Knowledge {
        let mut k = Knowledge::new();
        for key in r.mobile.held_keys() {
            k.add_key(key);
        }
        k.add_identity(r.mobile.u_i(), Role::Mobile);
        for sn in r.mobile.sensor_keys().keys() {
            k.add_identity(*sn, Role::Sensor);
        }
        for (kind, wire) in &r.wires {
            k.observe(*kind, wire);
        }
        k
    }

    #[test]
    fn mobile_cannot_reach_session_secrets() {
        for seed in 0..5 {
            let r = run(seed);
            let mut k = mobile_view(&r);
            k.close();
            assert!(!k.knows_session_key(&r.key));
            assert!(!k.knows_identity(r.m_id));
            assert!(!k.knows_nonce(r.nonce));
            assert!(k.knows_identity(r.sn_j));
            assert_eq!(k.inner_x().len(), 1);
        }
    }

    #[test]
    fn sensor_gateway_key_opens_everything() {
        let r = run(9);
        let mut k = mobile_view(&r);
        k.add_key(r.gw.sensor(r.sn_j).unwrap().k_gw_snj);
        k.close();
        assert!(k.knows_identity(r.m_id));
        assert!(k.knows_nonce(r.nonce));
        assert!(k.knows_session_key(&r.key));
    }

    #[test]
    fn gateway_identity_is_load_bearing() {
        // K_GW-SNj is a function of identities only; learning ID_gw is
        // enough to open X.
        let r = run(10);
        let mut k = mobile_view(&r);
        k.add_identity(r.gw.id(), Role::Gateway);
        k.close();
        assert!(k.knows_session_key(&r.key));
    }

    #[test]
    fn closure_is_monotone_and_idempotent() {
        let r = run(11);
        let mut k = mobile_view(&r);
        let before = k.summary();
        k.close();
        let after = k.summary();
        assert!(after.keys >= before.keys && after.identities >= before.identities);
        let again = {
            let mut k2 = k.clone();
            k2.close();
            k2.summary()
        };
        assert_eq!((again.keys, again.identities, again.nonces, again.opened), (after.keys, after.identities, after.nonces, after.opened));
    }
}
