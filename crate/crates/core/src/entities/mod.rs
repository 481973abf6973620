//! The four principals: the medical expert's device, the gateway, the
//! patient's mobile phone and the body sensor.
//!
//! Registration happens over an assumed secure channel and is modelled as
//! direct method calls. The authentication handshake is five steps:
//!
//! 1. expert logs in and sends `<CID_i, C, T_1>` to the gateway
//! 2. gateway verifies and sends `<V_i, T_3>` to the mobile
//! 3. mobile re-wraps the opaque `X` and sends `<V'_i, T_5>` to the sensor
//! 4. sensor derives `K_ssk` and sends `<L, T_7>` to the expert
//! 5. expert derives `K_ssk` and confirms it from `L`
//!
//! Every step either returns its outgoing message or an error; on error the
//! principal's state is left as it was and nothing is emitted.

mod expert;
mod fixtures;
mod gateway;
mod mobile;
mod sensor;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::SchemaError;
use crate::crypto::{derive_key, CryptoError, Digest160, FreshnessVerdict, Key128, Staleness};
use crate::ids::{Identity, Password};

pub use expert::{ExpertDevice, PendingHandshake};
pub use fixtures::{ExpertFixture, FixtureError, MobileFixture, Registry, RegistryConfig, SensorFixture};
pub use gateway::{
    ExpertCredentials, ExpertKeys, ExpertRecord, Gateway, MobileCredentials, MobileSensorShare,
    SensorCredentials, SensorRecord,
};
pub use mobile::MobileDevice;
pub use sensor::SensorNode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("identity {0} is already registered")]
    AlreadyRegistered(Identity),
    #[error("credential collides with an existing registration")]
    DuplicateCredential,
    #[error("mobile {0} is not registered")]
    UnknownMobile(Identity),
    #[error("sensor {0} is not known here")]
    UnknownSensor(Identity),
    #[error("expert {0} is not registered")]
    UnknownExpert(Identity),
    #[error("no registration matches the presented credential")]
    UnknownCredential,
    #[error("requested mobile/sensor pair is not registered together")]
    UnknownTarget,
    #[error("stale message: {0}")]
    Stale(Staleness),
    #[error("recovered identities do not match")]
    IdentityMismatch,
    #[error("login rejected")]
    LoginRejected,
    #[error("device is not logged in")]
    NotAuthenticated,
    #[error("protocol violation: {0}")]
    ProtocolViolation(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl ProtocolError {
    pub fn reason(&self) -> RejectReason {
        match self {
            ProtocolError::AlreadyRegistered(_) | ProtocolError::DuplicateCredential => {
                RejectReason::AlreadyRegistered
            }
            ProtocolError::UnknownMobile(_) => RejectReason::UnknownMobile,
            ProtocolError::UnknownSensor(_) => RejectReason::UnknownSensor,
            ProtocolError::UnknownExpert(_) => RejectReason::UnknownExpert,
            ProtocolError::UnknownCredential => RejectReason::UnknownCredential,
            ProtocolError::UnknownTarget => RejectReason::UnknownTarget,
            ProtocolError::Stale(Staleness::EchoMismatch) => RejectReason::EchoMismatch,
            ProtocolError::Stale(Staleness::WindowExceeded) => RejectReason::WindowExceeded,
            ProtocolError::IdentityMismatch => RejectReason::IdentityMismatch,
            ProtocolError::LoginRejected => RejectReason::LoginRejected,
            ProtocolError::NotAuthenticated => RejectReason::NotAuthenticated,
            ProtocolError::ProtocolViolation(_) => RejectReason::ProtocolViolation,
            ProtocolError::Crypto(_) | ProtocolError::Schema(_) => RejectReason::Malformed,
        }
    }
}

/// Flat rejection reason used in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    AlreadyRegistered,
    UnknownMobile,
    UnknownSensor,
    UnknownExpert,
    UnknownCredential,
    UnknownTarget,
    EchoMismatch,
    WindowExceeded,
    IdentityMismatch,
    LoginRejected,
    NotAuthenticated,
    ProtocolViolation,
    Malformed,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

fn fresh(verdict: FreshnessVerdict) -> Result<()> {
    match verdict {
        FreshnessVerdict::Fresh => Ok(()),
        FreshnessVerdict::Stale(why) => Err(ProtocolError::Stale(why)),
    }
}

/// `K_ssk` in both forms: the 160-bit digest and the 128-bit cipher key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionKey {
    pub digest: Digest160,
    pub cipher_key: Key128,
}

impl SessionKey {
    pub fn from_digest(digest: Digest160) -> Self {
        Self { digest, cipher_key: derive_key(&digest) }
    }
}

/// Replaces the expert's password: login check with `old_pw`, fresh salt,
/// new `EPW` to the gateway, and the returned `N_i` stored on the device.
///
/// On any failure both the device and the gateway are left unchanged.
pub fn password_update<R: Rng + ?Sized>(
    dev: &mut ExpertDevice,
    gw: &mut Gateway,
    m_id: Identity,
    old_pw: &Password,
    new_pw: &Password,
    rng: &mut R,
) -> Result<()> {
    if !dev.check_password(m_id, old_pw) {
        return Err(ProtocolError::LoginRejected);
    }
    let salt = Digest160(rng.gen());
    let epw = expert::extended_password(new_pw, &salt);
    let n_i = gw.update_password(m_id, &epw)?;
    dev.replace_password_state(n_i, salt);
    Ok(())
}

#[cfg(test)]
mod tests;
