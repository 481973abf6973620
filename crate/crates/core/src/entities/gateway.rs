use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{
    AuthRequest, CidPlain, CredentialC, CredentialPlain, GatewayToMobile, InnerX, InnerXPlain, Plaintext,
    ViPlain,
};
use crate::crypto::{check_freshness, derive_key, encrypt, hash160, xor_norm, Digest160, FreshnessWindow, Key128, Timestamp32};
use crate::ids::Identity;
use crate::metrics::Meter;

use super::{fresh, ProtocolError, Result};

/// Master and secret keys the gateway issues to an expert.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertKeys {
    pub k_j: Key128,
    pub k_l: Key128,
    pub s_key: Key128,
}

impl ExpertKeys {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self { k_j: Key128(rng.gen()), k_l: Key128(rng.gen()), s_key: Key128(rng.gen()) }
    }
}

/// Bundle returned to the expert's device at registration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpertCredentials {
    pub c: CredentialC,
    pub n_i: Digest160,
    pub keys: ExpertKeys,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpertRecord {
    pub m_id: Identity,
    pub keys: ExpertKeys,
    pub n_i: Digest160,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MobileCredentials {
    pub u_i: Identity,
    pub k_gw_u: Key128,
}

/// Everything a sensor is provisioned with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SensorCredentials {
    pub u_i: Identity,
    pub sn_j: Identity,
    pub k_u_snj: Key128,
    pub k_gw_snj: Key128,
}

/// The part of a sensor registration the owning mobile receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MobileSensorShare {
    pub u_i: Identity,
    pub sn_j: Identity,
    pub k_u_snj: Key128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SensorRecord {
    pub owner: Identity,
    pub k_gw_snj: Key128,
    pub k_u_snj: Key128,
}

/// `derive_key(H(a xor b))`, the registration-time key formula.
pub(crate) fn pair_key(a: Identity, b: Identity) -> Key128 {
    derive_key(&hash160(&xor_norm(&a.to_bits(), &b.to_bits())))
}

/// `H(M_id xor EPW xor S_key)`.
pub(crate) fn verifier(m_id: Identity, epw: &Digest160, s_key: &Key128) -> Digest160 {
    let inner = xor_norm(&xor_norm(&m_id.to_bits(), &epw.to_bits()), &s_key.to_bits());
    hash160(&inner)
}

/// The trusted registration and authentication server.
#[derive(Clone, Debug)]
pub struct Gateway {
    id_gw: Identity,
    window: FreshnessWindow,
    experts: BTreeMap<CredentialC, ExpertRecord>,
    expert_ids: BTreeMap<Identity, CredentialC>,
    mobiles: BTreeMap<Identity, Key128>,
    sensors: BTreeMap<Identity, SensorRecord>,
    pub meter: Meter,
}

impl Gateway {
    pub fn new(id_gw: Identity, window: FreshnessWindow) -> Self {
        Self {
            id_gw,
            window,
            experts: BTreeMap::new(),
            expert_ids: BTreeMap::new(),
            mobiles: BTreeMap::new(),
            sensors: BTreeMap::new(),
            meter: Meter::enabled(),
        }
    }

    pub fn id(&self) -> Identity {
        self.id_gw
    }

    pub fn window(&self) -> FreshnessWindow {
        self.window
    }

    pub fn set_window(&mut self, window: FreshnessWindow) {
        self.window = window;
    }

    /// Issues fresh random `K_j`, `K_l` and `S_key` to a new expert.
    pub fn register_expert<R: Rng + ?Sized>(
        &mut self,
        m_id: Identity,
        epw: &Digest160,
        rng: &mut R,
    ) -> Result<ExpertCredentials> {
        if self.expert_ids.contains_key(&m_id) {
            return Err(ProtocolError::AlreadyRegistered(m_id));
        }
        self.register_expert_with_keys(m_id, epw, ExpertKeys::random(rng))
    }

    pub fn register_expert_with_keys(
        &mut self,
        m_id: Identity,
        epw: &Digest160,
        keys: ExpertKeys,
    ) -> Result<ExpertCredentials> {
        if self.expert_ids.contains_key(&m_id) {
            return Err(ProtocolError::AlreadyRegistered(m_id));
        }
        let plain = CredentialPlain { m_id, id_gw: self.id_gw };
        let c = CredentialC::from_cipher(&encrypt(&keys.k_j, &plain.to_bits())?)?;
        if self.experts.contains_key(&c) {
            return Err(ProtocolError::DuplicateCredential);
        }
        let n_i = verifier(m_id, epw, &keys.s_key);
        self.experts.insert(c, ExpertRecord { m_id, keys, n_i });
        self.expert_ids.insert(m_id, c);
        Ok(ExpertCredentials { c, n_i, keys })
    }

    /// `K_GW-U = H(U_i xor ID_gw)`.
    pub fn register_mobile(&mut self, u_i: Identity) -> Result<MobileCredentials> {
        if self.mobiles.contains_key(&u_i) {
            return Err(ProtocolError::AlreadyRegistered(u_i));
        }
        let k_gw_u = pair_key(u_i, self.id_gw);
        self.mobiles.insert(u_i, k_gw_u);
        Ok(MobileCredentials { u_i, k_gw_u })
    }

    /// `K_U-SNj = H(U_i xor SN_j)` and `K_GW-SNj = H(ID_gw xor SN_j)`.
    pub fn register_sensor(
        &mut self,
        u_i: Identity,
        sn_j: Identity,
    ) -> Result<(SensorCredentials, MobileSensorShare)> {
        if !self.mobiles.contains_key(&u_i) {
            return Err(ProtocolError::UnknownMobile(u_i));
        }
        if self.sensors.contains_key(&sn_j) {
            return Err(ProtocolError::AlreadyRegistered(sn_j));
        }
        let k_u_snj = pair_key(u_i, sn_j);
        let k_gw_snj = pair_key(self.id_gw, sn_j);
        self.sensors.insert(sn_j, SensorRecord { owner: u_i, k_gw_snj, k_u_snj });
        Ok((
            SensorCredentials { u_i, sn_j, k_u_snj, k_gw_snj },
            MobileSensorShare { u_i, sn_j, k_u_snj },
        ))
    }

    /// Recomputes and stores `N_i` for a new extended password.
    pub fn update_password(&mut self, m_id: Identity, epw_new: &Digest160) -> Result<Digest160> {
        let c = self.expert_ids.get(&m_id).ok_or(ProtocolError::UnknownExpert(m_id))?;
        let record = self.experts.get_mut(c).expect("indexes agree");
        record.n_i = verifier(m_id, epw_new, &record.keys.s_key);
        Ok(record.n_i)
    }

    pub fn expert_by_credential(&self, c: &CredentialC) -> Option<&ExpertRecord> {
        self.experts.get(c)
    }

    pub fn mobile_key(&self, u_i: Identity) -> Option<Key128> {
        self.mobiles.get(&u_i).copied()
    }

    pub fn sensor(&self, sn_j: Identity) -> Option<&SensorRecord> {
        self.sensors.get(&sn_j)
    }

    /// Step 2.
    ///
    /// Identity checks run before the freshness check, so a corrupted
    /// `CID_i` is reported as an identity mismatch even when the corruption
    /// also hits the embedded timestamp.
    pub fn handle_auth(&mut self, req: &AuthRequest, now: Timestamp32) -> Result<GatewayToMobile> {
        let record = *self.experts.get(&req.c).ok_or(ProtocolError::UnknownCredential)?;

        let cid = CidPlain::from_padded(&self.meter.decrypt(&record.keys.k_l, &req.cid))?;
        let cred = CredentialPlain::from_padded(&self.meter.decrypt(&record.keys.k_j, &req.c.to_cipher()))?;
        let h_mid = self.meter.hash(&cred.m_id.to_bits());

        if h_mid != cid.h_mid || cred.id_gw != self.id_gw || cred.m_id != record.m_id || cid.c != req.c {
            return Err(ProtocolError::IdentityMismatch);
        }
        fresh(check_freshness(req.t1, cid.t1, now, self.window))?;

        let k_gw_u = *self.mobiles.get(&cid.u_i).ok_or(ProtocolError::UnknownTarget)?;
        let sensor = self.sensors.get(&cid.sn_j).ok_or(ProtocolError::UnknownTarget)?;
        if sensor.owner != cid.u_i {
            return Err(ProtocolError::UnknownTarget);
        }

        let x_plain = InnerXPlain { m_id: cred.m_id, nonce: cid.nonce };
        let x = InnerX::from_cipher(&self.meter.encrypt(&sensor.k_gw_snj, &x_plain.to_bits())?)?;
        let vi_plain = ViPlain { u_i: cid.u_i, sn_j: cid.sn_j, x, t3: now };
        let vi = self.meter.encrypt(&k_gw_u, &vi_plain.to_bits())?;
        Ok(GatewayToMobile::assemble(&vi_plain, vi))
    }
}
