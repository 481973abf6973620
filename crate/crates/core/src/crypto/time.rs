use std::cell::Cell;
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::bits::BitString;

/// A 32-bit clock reading in whole seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp32(pub u32);

impl Timestamp32 {
    pub const WIDTH: usize = 32;

    pub fn to_bits(self) -> BitString {
        BitString::from_uint(u64::from(self.0), Self::WIDTH)
    }

    pub fn saturating_add(self, seconds: u32) -> Self {
        Self(self.0.saturating_add(seconds))
    }
}

impl fmt::Display for Timestamp32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

/// Maximum permitted transit delay of a protocol message, inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FreshnessWindow(u32);

impl FreshnessWindow {
    pub const DEFAULT_SECONDS: u32 = 2;

    /// `None` for a zero-width window.
    pub fn new(delta_seconds: u32) -> Option<Self> {
        (delta_seconds > 0).then_some(Self(delta_seconds))
    }

    pub fn seconds(self) -> u32 {
        self.0
    }
}

impl Default for FreshnessWindow {
    fn default() -> Self {
        Self(Self::DEFAULT_SECONDS)
    }
}

impl TryFrom<u32> for FreshnessWindow {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| "freshness window must be positive".to_owned())
    }
}

impl From<FreshnessWindow> for u32 {
    fn from(w: FreshnessWindow) -> u32 {
        w.0
    }
}

/// Why a message failed the freshness test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Staleness {
    /// The timestamp recovered from the ciphertext differs from the cleartext one.
    EchoMismatch,
    /// The message arrived outside the window (or before it was sent).
    WindowExceeded,
}

impl fmt::Display for Staleness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Staleness::EchoMismatch => f.write_str("EchoMismatch"),
            Staleness::WindowExceeded => f.write_str("WindowExceeded"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreshnessVerdict {
    Fresh,
    Stale(Staleness),
}

impl FreshnessVerdict {
    pub fn is_fresh(self) -> bool {
        self == FreshnessVerdict::Fresh
    }
}

/// Accepts iff the echoed timestamp equals the cleartext one and
/// `0 <= t_received - t_sent <= window`.
pub fn check_freshness(
    t_sent: Timestamp32,
    t_echoed: Timestamp32,
    t_received: Timestamp32,
    window: FreshnessWindow,
) -> FreshnessVerdict {
    if t_echoed != t_sent {
        return FreshnessVerdict::Stale(Staleness::EchoMismatch);
    }
    let elapsed = i64::from(t_received.0) - i64::from(t_sent.0);
    if (0..=i64::from(window.seconds())).contains(&elapsed) {
        FreshnessVerdict::Fresh
    } else {
        FreshnessVerdict::Stale(Staleness::WindowExceeded)
    }
}

/// Source of protocol timestamps.
pub trait Clock {
    fn now(&self) -> Timestamp32;
}

/// A manually driven clock that never moves backwards.
#[derive(Debug, Default)]
pub struct LogicalClock {
    now: Cell<u32>,
}

impl LogicalClock {
    pub fn starting_at(t: Timestamp32) -> Self {
        Self { now: Cell::new(t.0) }
    }

    /// Moves the clock forward; earlier readings are ignored.
    pub fn advance_to(&self, t: Timestamp32) {
        if t.0 > self.now.get() {
            self.now.set(t.0);
        }
    }

    pub fn advance_by(&self, seconds: u32) {
        self.now.set(self.now.get().saturating_add(seconds));
    }
}

impl Clock for LogicalClock {
    fn now(&self) -> Timestamp32 {
        Timestamp32(self.now.get())
    }
}

/// Wall-clock seconds since the Unix epoch, truncated to 32 bits.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp32 {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Timestamp32(secs as u32)
    }
}
