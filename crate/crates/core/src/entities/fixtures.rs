//! Registration fixtures: which principals exist and, optionally, the exact
//! secrets they are provisioned with.
//!
//! ```toml
//! gateway_id = 256
//!
//! [[experts]]
//! id = 268435456
//! password = "correct horse"
//! salt = "00112233445566778899aabbccddeeff00112233"   # optional, 160-bit hex
//! keys = { k_j = "..", k_l = "..", s_key = ".." }     # optional, 128-bit hex each
//!
//! [[mobiles]]
//! id = 536870912
//!
//! [[sensors]]
//! id = 805306368
//! owner = 536870912
//! ```

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Digest160, FreshnessWindow, Salt160};
use crate::ids::{Identity, Password};

use super::gateway::{ExpertKeys, Gateway};
use super::{ExpertDevice, MobileDevice, ProtocolError, SensorNode};

pub const DEFAULT_GATEWAY_ID: Identity = Identity(0x0000_0100);
const EXPERT_BASE: u32 = 0x1000_0000;
const MOBILE_BASE: u32 = 0x2000_0000;
const SENSOR_BASE: u32 = 0x3000_0000;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid registry file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("registration failed: {0}")]
    Protocol(#[from] ProtocolError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertFixture {
    pub id: Identity,
    pub password: Password,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salt: Option<Salt160>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keys: Option<ExpertKeys>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobileFixture {
    pub id: Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFixture {
    pub id: Identity,
    pub owner: Identity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryConfig {
    pub gateway_id: Identity,
    #[serde(default)]
    pub experts: Vec<ExpertFixture>,
    #[serde(default)]
    pub mobiles: Vec<MobileFixture>,
    #[serde(default)]
    pub sensors: Vec<SensorFixture>,
}

impl RegistryConfig {
    /// Sequentially numbered principals: `experts` experts, `patients`
    /// mobiles and `sensors_per_patient` sensors on each mobile.
    pub fn generated(experts: u32, patients: u32, sensors_per_patient: u32) -> Self {
        let experts = (0..experts)
            .map(|e| ExpertFixture {
                id: Identity(EXPERT_BASE + e),
                password: Password::new(format!("expert-{e}-password")),
                salt: None,
                keys: None,
            })
            .collect();
        let mobiles: Vec<_> = (0..patients).map(|p| MobileFixture { id: Identity(MOBILE_BASE + p) }).collect();
        let sensors = mobiles
            .iter()
            .enumerate()
            .flat_map(|(p, m)| {
                (0..sensors_per_patient).map(move |s| SensorFixture {
                    id: Identity(SENSOR_BASE + ((p as u32) << 8) + s),
                    owner: m.id,
                })
            })
            .collect();
        Self { gateway_id: DEFAULT_GATEWAY_ID, experts, mobiles, sensors }
    }

    pub fn from_toml(text: &str) -> Result<Self, FixtureError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| FixtureError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// Runs every registration in file order. Missing salts and keys are
    /// drawn from `rng`, salt first, expert by expert.
    pub fn build<R: Rng + ?Sized>(&self, window: FreshnessWindow, rng: &mut R) -> Result<Registry, FixtureError> {
        let mut gateway = Gateway::new(self.gateway_id, window);
        let mut experts = Vec::with_capacity(self.experts.len());
        for fx in &self.experts {
            let salt = fx.salt.unwrap_or_else(|| Digest160(rng.gen()));
            let keys = fx.keys.unwrap_or_else(|| ExpertKeys::random(rng));
            experts.push(ExpertDevice::enroll_with(&mut gateway, fx.id, &fx.password, salt, keys)?);
        }
        let mut mobiles = Vec::with_capacity(self.mobiles.len());
        for fx in &self.mobiles {
            mobiles.push(MobileDevice::enroll(&mut gateway, fx.id)?);
        }
        let mut sensors = Vec::with_capacity(self.sensors.len());
        for fx in &self.sensors {
            let mobile = mobiles
                .iter_mut()
                .find(|m| m.u_i() == fx.owner)
                .ok_or(ProtocolError::UnknownMobile(fx.owner))?;
            sensors.push(SensorNode::enroll(&mut gateway, mobile, fx.id)?);
        }
        Ok(Registry {
            gateway,
            experts,
            passwords: self.experts.iter().map(|e| e.password.clone()).collect(),
            mobiles,
            sensors,
        })
    }
}

/// Provisioned principals, index-aligned with the fixture lists.
#[derive(Clone, Debug)]
pub struct Registry {
    pub gateway: Gateway,
    pub experts: Vec<ExpertDevice>,
    pub passwords: Vec<Password>,
    pub mobiles: Vec<MobileDevice>,
    pub sensors: Vec<SensorNode>,
}

impl Registry {
    pub fn mobile_index(&self, u_i: Identity) -> Option<usize> {
        self.mobiles.iter().position(|m| m.u_i() == u_i)
    }

    pub fn set_window(&mut self, window: FreshnessWindow) {
        self.gateway.set_window(window);
        self.experts.iter_mut().for_each(|e| e.set_window(window));
        self.mobiles.iter_mut().for_each(|m| m.set_window(window));
        self.sensors.iter_mut().for_each(|s| s.set_window(window));
    }

    pub fn set_instrumented(&mut self, on: bool) {
        self.gateway.meter.set_enabled(on);
        self.experts.iter_mut().for_each(|e| e.meter.set_enabled(on));
        self.mobiles.iter_mut().for_each(|m| m.meter.set_enabled(on));
        self.sensors.iter_mut().for_each(|s| s.meter.set_enabled(on));
    }
}
