//! Adversary models tapping every public hop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{rewrite_timestamp, MessageKind, WireBits};
use crate::crypto::{BitString, Timestamp32};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Forgery {
    /// Random `CID_i` bits with a captured genuine `C`.
    RandomCid,
    /// Captured `CID_i` with a random `C`.
    RandomCredential,
}

fn default_attempts() -> u32 {
    50
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryModel {
    /// Observes and forwards.
    #[default]
    Passive,
    /// Holds back every honest message of `target` and delivers the copy
    /// `delay_s` late, optionally with its cleartext timestamp set to the
    /// delivery time.
    Replay {
        target: MessageKind,
        delay_s: u32,
        #[serde(default)]
        rewrite_timestamp: bool,
    },
    /// Flips wire bit `bit` of every honest message of `target`.
    Tamper { target: MessageKind, bit: usize },
    /// Injects forged auth requests once a genuine one has been seen.
    Masquerade {
        forgery: Forgery,
        #[serde(default = "default_attempts")]
        attempts: u32,
    },
    /// The mobile at index `mobile` is controlled by the adversary. It
    /// follows the protocol; afterwards its knowledge is closed over.
    CompromisedMobile {
        #[serde(default)]
        mobile: usize,
    },
}

impl AdversaryModel {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryModel::Passive => "passive",
            AdversaryModel::Replay { .. } => "replay",
            AdversaryModel::Tamper { .. } => "tamper",
            AdversaryModel::Masquerade { .. } => "masquerade",
            AdversaryModel::CompromisedMobile { .. } => "compromised-mobile",
        }
    }
}

/// Maps simulated microseconds onto the protocol's seconds clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimClock {
    pub epoch_s: u32,
}

impl SimClock {
    pub fn ts(self, us: u64) -> Timestamp32 {
        Timestamp32(self.epoch_s.saturating_add((us / 1_000_000) as u32))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observed {
    pub kind: MessageKind,
    pub wire: WireBits,
}

/// What reaches the receiver after the tap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intercepted {
    pub wire: WireBits,
    pub at_us: u64,
    pub touched: bool,
    pub note: Option<String>,
}

/// A message the adversary creates rather than relays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forged {
    pub kind: MessageKind,
    pub wire: WireBits,
    pub at_us: u64,
    pub note: String,
}

#[derive(Clone, Debug)]
pub struct Tap {
    model: AdversaryModel,
    observed: Vec<Observed>,
    injected: bool,
}

impl Tap {
    pub fn new(model: AdversaryModel) -> Self {
        Self { model, observed: Vec::new(), injected: false }
    }

    pub fn model(&self) -> &AdversaryModel {
        &self.model
    }

    /// Every wire seen on a public hop, in send order.
    pub fn observed(&self) -> &[Observed] {
        &self.observed
    }

    /// Called once per hop. Only honest traffic is attacked.
    pub fn intercept<R: Rng + ?Sized>(
        &mut self,
        kind: MessageKind,
        wire: WireBits,
        arrive_us: u64,
        honest: bool,
        clock: SimClock,
        rng: &mut R,
    ) -> (Intercepted, Vec<Forged>) {
        self.observed.push(Observed { kind, wire: wire.clone() });
        let pass = Intercepted { wire: wire.clone(), at_us: arrive_us, touched: false, note: None };
        if !honest {
            return (pass, Vec::new());
        }
        match &self.model {
            AdversaryModel::Replay { target, delay_s, rewrite_timestamp: rewrite } if *target == kind => {
                let at_us = arrive_us + u64::from(*delay_s) * 1_000_000;
                let (wire, note) = if *rewrite {
                    let ts = clock.ts(at_us);
                    (rewrite_timestamp(kind, &wire, ts), format!("held {delay_s}s, timestamp set to {ts}"))
                } else {
                    (wire, format!("held {delay_s}s"))
                };
                (Intercepted { wire, at_us, touched: true, note: Some(note) }, Vec::new())
            }
            AdversaryModel::Tamper { target, bit } if *target == kind => {
                let mut wire = wire;
                wire.flip(*bit);
                (Intercepted { wire, at_us: arrive_us, touched: true, note: Some(format!("flipped bit {bit}")) }, Vec::new())
            }
            AdversaryModel::Masquerade { forgery, attempts } if kind == MessageKind::AuthRequest && !self.injected => {
                self.injected = true;
                let forged = (0..*attempts)
                    .map(|i| {
                        let at_us = arrive_us + 1 + u64::from(i);
                        Forged {
                            kind,
                            wire: forge_auth_request(&wire, *forgery, clock.ts(at_us), rng),
                            at_us,
                            note: format!("forgery {i} ({})", forgery_name(*forgery)),
                        }
                    })
                    .collect();
                (pass, forged)
            }
            _ => (pass, Vec::new()),
        }
    }
}

fn forgery_name(f: Forgery) -> &'static str {
    match f {
        Forgery::RandomCid => "random CID, genuine C",
        Forgery::RandomCredential => "captured CID, random C",
    }
}

fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> BitString {
    (0..len).map(|_| rng.gen::<bool>()).collect()
}

/// Builds `<CID, C, T>` from a captured auth request, replacing one field
/// with random bits and stamping the current time.
pub fn forge_auth_request<R: Rng + ?Sized>(
    captured: &WireBits,
    forgery: Forgery,
    now: Timestamp32,
    rng: &mut R,
) -> WireBits {
    let bits = captured.bits();
    let (cid, c) = match forgery {
        Forgery::RandomCid => (random_bits(512, rng), bits.slice(512..640)),
        Forgery::RandomCredential => (bits.slice(0..512), random_bits(128, rng)),
    };
    WireBits::from_bits(BitString::concat([&cid, &c, &now.to_bits()]))
}
