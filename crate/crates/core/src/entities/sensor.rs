use crate::codec::{InnerXPlain, LPlain, MobileToSensor, Plaintext, SensorToExpert, ViPrimePlain};
use crate::crypto::{check_freshness, FreshnessWindow, Key128, Timestamp32};
use crate::ids::Identity;
use crate::metrics::Meter;

use super::expert::session_key;
use super::gateway::{Gateway, SensorCredentials};
use super::mobile::MobileDevice;
use super::{fresh, ProtocolError, Result, SessionKey};

/// A body sensor bound to one patient's mobile.
#[derive(Clone, Debug)]
pub struct SensorNode {
    sn_j: Identity,
    u_i: Identity,
    k_u_snj: Key128,
    k_gw_snj: Key128,
    window: FreshnessWindow,
    session: Option<SessionKey>,
    pub meter: Meter,
}

impl SensorNode {
    /// Registers the sensor under `mobile` and hands the mobile its share.
    pub fn enroll(gw: &mut Gateway, mobile: &mut MobileDevice, sn_j: Identity) -> Result<Self> {
        let (creds, share) = gw.register_sensor(mobile.u_i(), sn_j)?;
        mobile.install_share(share)?;
        Ok(Self::provision(creds, gw.window()))
    }

    pub fn provision(creds: SensorCredentials, window: FreshnessWindow) -> Self {
        Self {
            sn_j: creds.sn_j,
            u_i: creds.u_i,
            k_u_snj: creds.k_u_snj,
            k_gw_snj: creds.k_gw_snj,
            window,
            session: None,
            meter: Meter::enabled(),
        }
    }

    pub fn sn_j(&self) -> Identity {
        self.sn_j
    }

    pub fn owner(&self) -> Identity {
        self.u_i
    }

    pub fn session(&self) -> Option<&SessionKey> {
        self.session.as_ref()
    }

    pub fn set_window(&mut self, window: FreshnessWindow) {
        self.window = window;
    }

    /// Step 4: opens `V'_i`, checks freshness and addressing, then opens `X`
    /// and derives `K_ssk`.
    pub fn handle(&mut self, msg: &MobileToSensor, now: Timestamp32) -> Result<(SensorToExpert, SessionKey)> {
        let outer = ViPrimePlain::from_padded(&self.meter.decrypt(&self.k_u_snj, &msg.vi_prime))?;
        fresh(check_freshness(msg.t5, outer.t5, now, self.window))?;
        if outer.sn_j != self.sn_j {
            return Err(ProtocolError::IdentityMismatch);
        }
        let inner = InnerXPlain::from_padded(&self.meter.decrypt(&self.k_gw_snj, &outer.x.to_cipher()))?;
        let key = session_key(&mut self.meter, inner.m_id, outer.sn_j, inner.nonce);
        let plain = LPlain { sn_j: outer.sn_j, m_id: inner.m_id, t7: now };
        let l = self.meter.encrypt(&key.cipher_key, &plain.to_bits())?;
        self.session = Some(key);
        Ok((SensorToExpert::assemble(&plain, l), key))
    }
}
