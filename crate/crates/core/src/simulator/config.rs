//! Scenario configuration, loadable from TOML.
//!
//! ```toml
//! seed = 7
//! delta_tc = 2            # seconds, inclusive
//! latency_us = 20000      # per hop
//! jitter_us = 0           # uniform extra delay in [0, jitter_us]
//!
//! [network]
//! experts = 1
//! patients = 1
//! sensors_per_patient = 3
//!
//! [traffic]
//! packets_per_sensor = 20
//! packet_bytes = 128
//!
//! [adversary]
//! kind = "replay"
//! target = "auth-request"
//! delay_s = 10
//! rewrite_timestamp = true
//! ```
//!
//! An explicit `[registry]` table (see [`RegistryConfig`]) replaces the
//! generated `[network]` principals.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::MessageKind;
use crate::crypto::FreshnessWindow;
use crate::entities::{FixtureError, RegistryConfig};

use super::adversary::AdversaryModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub experts: u32,
    pub patients: u32,
    pub sensors_per_patient: u32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { experts: 1, patients: 1, sensors_per_patient: 1 }
    }
}

/// Post-handshake data traffic from every keyed sensor to its expert.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub packets_per_sensor: u32,
    pub packet_bytes: u32,
    pub interval_us: u64,
    pub bandwidth_bps: u64,
    pub propagation_us: u64,
    pub repetitions: u32,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            packets_per_sensor: 20,
            packet_bytes: 128,
            interval_us: 50_000,
            bandwidth_bps: 1_000_000,
            propagation_us: 200,
            repetitions: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub delta_tc: FreshnessWindow,
    /// Protocol clock reading, in seconds, at simulated time zero.
    pub epoch_s: u32,
    pub latency_us: u64,
    pub jitter_us: u64,
    pub instrument: bool,
    pub network: NetworkConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registry: Option<RegistryConfig>,
    pub traffic: TrafficConfig,
    pub adversary: AdversaryModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            delta_tc: FreshnessWindow::default(),
            epoch_s: 1_000_000,
            latency_us: 20_000,
            jitter_us: 0,
            instrument: true,
            network: NetworkConfig::default(),
            registry: None,
            traffic: TrafficConfig::default(),
            adversary: AdversaryModel::Passive,
        }
    }
}

impl ScenarioConfig {
    pub fn with_network(experts: u32, patients: u32, sensors_per_patient: u32) -> Self {
        Self { network: NetworkConfig { experts, patients, sensors_per_patient }, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn registry_config(&self) -> RegistryConfig {
        self.registry.clone().unwrap_or_else(|| {
            RegistryConfig::generated(self.network.experts, self.network.patients, self.network.sensors_per_patient)
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        let reg = self.registry_config();
        if reg.experts.is_empty() || reg.sensors.is_empty() {
            return invalid("at least one expert and one sensor are required".into());
        }
        if self.traffic.repetitions == 0 {
            return invalid("traffic.repetitions must be at least 1".into());
        }
        if self.traffic.bandwidth_bps == 0 || self.traffic.packet_bytes == 0 {
            return invalid("traffic bandwidth and packet size must be positive".into());
        }
        match &self.adversary {
            AdversaryModel::Replay { delay_s, .. } if *delay_s <= self.delta_tc.seconds() => invalid(format!(
                "replay delay {delay_s}s must exceed the freshness window of {}s",
                self.delta_tc.seconds()
            )),
            AdversaryModel::Tamper { target, bit } if *bit >= target.wire_size_bits() => {
                invalid(format!("bit {bit} is outside the {}-bit {target} message", target.wire_size_bits()))
            }
            AdversaryModel::CompromisedMobile { mobile, .. } if *mobile >= reg.mobiles.len() => {
                invalid(format!("no mobile with index {mobile}"))
            }
            _ => Ok(()),
        }
    }
}

/// Bits of `kind` that lie inside ciphertext, as opposed to the cleartext
/// timestamp companion.
pub fn ciphertext_bits(kind: MessageKind) -> std::ops::Range<usize> {
    0..kind.timestamp_range().start
}
