use std::collections::BTreeMap;

use crate::codec::{GatewayToMobile, MobileToSensor, Plaintext, ViPlain, ViPrimePlain};
use crate::crypto::{check_freshness, FreshnessWindow, Key128, Timestamp32};
use crate::ids::Identity;
use crate::metrics::Meter;

use super::gateway::{Gateway, MobileCredentials, MobileSensorShare};
use super::{fresh, ProtocolError, Result};

/// The patient's phone. Semi-trusted: it relays `X` without being able to
/// open it, and holds no key from which `K_ssk` could be derived.
#[derive(Clone, Debug)]
pub struct MobileDevice {
    u_i: Identity,
    k_gw_u: Key128,
    sensor_keys: BTreeMap<Identity, Key128>,
    window: FreshnessWindow,
    pub meter: Meter,
}

impl MobileDevice {
    pub fn enroll(gw: &mut Gateway, u_i: Identity) -> Result<Self> {
        let creds = gw.register_mobile(u_i)?;
        Ok(Self::provision(creds, gw.window()))
    }

    pub fn provision(creds: MobileCredentials, window: FreshnessWindow) -> Self {
        Self {
            u_i: creds.u_i,
            k_gw_u: creds.k_gw_u,
            sensor_keys: BTreeMap::new(),
            window,
            meter: Meter::enabled(),
        }
    }

    pub fn u_i(&self) -> Identity {
        self.u_i
    }

    pub fn k_gw_u(&self) -> Key128 {
        self.k_gw_u
    }

    pub fn sensor_keys(&self) -> &BTreeMap<Identity, Key128> {
        &self.sensor_keys
    }

    /// Every key this device holds; what an attacker who owns the phone gets.
    pub fn held_keys(&self) -> Vec<Key128> {
        std::iter::once(self.k_gw_u).chain(self.sensor_keys.values().copied()).collect()
    }

    pub fn set_window(&mut self, window: FreshnessWindow) {
        self.window = window;
    }

    pub fn install_share(&mut self, share: MobileSensorShare) -> Result<()> {
        if share.u_i != self.u_i {
            return Err(ProtocolError::UnknownMobile(share.u_i));
        }
        if self.sensor_keys.contains_key(&share.sn_j) {
            return Err(ProtocolError::AlreadyRegistered(share.sn_j));
        }
        self.sensor_keys.insert(share.sn_j, share.k_u_snj);
        Ok(())
    }

    /// Step 3: opens `V_i`, checks it, and re-wraps the opaque `X` for the
    /// sensor under `K_U-SNj`.
    pub fn forward(&mut self, msg: &GatewayToMobile, now: Timestamp32) -> Result<MobileToSensor> {
        let vi = ViPlain::from_padded(&self.meter.decrypt(&self.k_gw_u, &msg.vi))?;
        fresh(check_freshness(msg.t3, vi.t3, now, self.window))?;
        if vi.u_i != self.u_i {
            return Err(ProtocolError::IdentityMismatch);
        }
        let k_u_snj = *self.sensor_keys.get(&vi.sn_j).ok_or(ProtocolError::UnknownSensor(vi.sn_j))?;
        let plain = ViPrimePlain { x: vi.x, u_i: self.u_i, sn_j: vi.sn_j, t5: now };
        let sealed = self.meter.encrypt(&k_u_snj, &plain.to_bits())?;
        Ok(MobileToSensor::assemble(&plain, sealed))
    }
}
