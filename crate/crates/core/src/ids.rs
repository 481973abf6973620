use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{hash160, BitString, Digest160};

/// 32-bit principal identifier (expert, mobile, sensor or gateway).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Identity(pub u32);

impl Identity {
    pub const WIDTH: usize = 32;

    pub fn to_bits(self) -> BitString {
        BitString::from_uint(u64::from(self.0), Self::WIDTH)
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#010x}", self.0)
    }
}

/// The expert's per-session 64-bit nonce `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nonce64(pub u64);

impl Nonce64 {
    pub const WIDTH: usize = 64;

    pub fn to_bits(self) -> BitString {
        BitString::from_uint(self.0, Self::WIDTH)
    }
}

/// A user-chosen password of any length.
///
/// Passwords are hashed to 160 bits before they meet the salt, so the XOR
/// with `r_d` always has equal-width operands.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Password(String);

impl Password {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn digest(&self) -> Digest160 {
        hash160(&BitString::from_bytes(self.0.as_bytes()))
    }
}

impl fmt::Debug for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Password(..)")
    }
}

impl From<&str> for Password {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// The four protocol principals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Expert,
    Gateway,
    Mobile,
    Sensor,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Expert, Role::Gateway, Role::Mobile, Role::Sensor];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Expert => "expert",
            Role::Gateway => "gateway",
            Role::Mobile => "mobile",
            Role::Sensor => "sensor",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
