//! End-to-end expert-to-sensor authentication and session-key agreement
//! for wireless body area networks.

pub mod codec;
pub mod ban;
pub mod crypto;
pub mod entities;
pub mod ids;
pub mod metrics;
pub mod simulator;

pub use codec::{MessageKind, ProtocolMessage, SchemaError, WireBits};
pub use crypto::{CipherText, Digest160, FreshnessWindow, Key128, Timestamp32};
pub use entities::{ProtocolError, RejectReason, SessionKey};
pub use ids::{Identity, Nonce64, Password, Role};
pub use simulator::{ScenarioConfig, ScenarioReport};

/// Traffic statistics at double and single precision.
pub type TrafficStats64 = simulator::TrafficStats<f64>;
pub type TrafficStats32 = simulator::TrafficStats<f32>;
