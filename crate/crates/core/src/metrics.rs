//! Primitive-operation and bit accounting for the authentication phase.
//!
//! Principals perform every authentication-phase hash, XOR and cipher call
//! through a [`Meter`]. The simulator snapshots each principal's meter around
//! every handshake step, which yields a [`HandshakeTrace`]; the functions here
//! turn traces into per-principal op counts and per-hop bit counts.
//!
//! The mapping from protocol formulas to tallies is [`OP_MAPPING`]. Hashing
//! done during registration or password update, and the canonicalizing hash
//! of the raw password, are not metered.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{MessageKind, HANDSHAKE_TOTAL_BITS};
use crate::crypto::{self, BitString, CipherText, CryptoError, Digest160, Key128};
use crate::ids::Role;

/// Counts of `T_H`, `T_ENC` (encryption or decryption) and `T_XOR`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpTally {
    pub hash: u32,
    pub enc_dec: u32,
    pub xor: u32,
}

impl OpTally {
    pub const fn new(hash: u32, enc_dec: u32, xor: u32) -> Self {
        Self { hash, enc_dec, xor }
    }
}

impl Add for OpTally {
    type Output = OpTally;

    fn add(self, o: OpTally) -> OpTally {
        OpTally::new(self.hash + o.hash, self.enc_dec + o.enc_dec, self.xor + o.xor)
    }
}

impl AddAssign for OpTally {
    fn add_assign(&mut self, o: OpTally) {
        *self = *self + o;
    }
}

impl Sub for OpTally {
    type Output = OpTally;

    fn sub(self, o: OpTally) -> OpTally {
        OpTally::new(self.hash - o.hash, self.enc_dec - o.enc_dec, self.xor - o.xor)
    }
}

impl fmt::Display for OpTally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (n, sym) in [(self.hash, "T_H"), (self.xor, "T_XOR"), (self.enc_dec, "T_ENC")] {
            match n {
                0 => {}
                1 => terms.push(sym.to_owned()),
                n => terms.push(format!("{n}{sym}")),
            }
        }
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}

/// Counting wrapper around the crypto primitives.
///
/// A disabled meter performs the same computations and records nothing.
#[derive(Clone, Debug, Default)]
pub struct Meter {
    enabled: bool,
    tally: OpTally,
}

impl Meter {
    pub fn enabled() -> Self {
        Self { enabled: true, tally: OpTally::default() }
    }

    pub fn disabled() -> Self {
        Self { enabled: false, tally: OpTally::default() }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn set_enabled(&mut self, on: bool) {
        self.enabled = on;
    }

    pub fn tally(&self) -> OpTally {
        self.tally
    }

    fn bump(&mut self, f: impl FnOnce(&mut OpTally)) {
        if self.enabled {
            f(&mut self.tally);
        }
    }

    pub fn hash(&mut self, input: &BitString) -> Digest160 {
        self.bump(|t| t.hash += 1);
        crypto::hash160(input)
    }

    /// One XOR per call regardless of operand width.
    pub fn xor(&mut self, a: &BitString, b: &BitString) -> BitString {
        self.bump(|t| t.xor += 1);
        crypto::xor_norm(a, b)
    }

    pub fn encrypt(&mut self, key: &Key128, plaintext: &BitString) -> Result<CipherText, CryptoError> {
        self.bump(|t| t.enc_dec += 1);
        crypto::encrypt(key, plaintext)
    }

    pub fn decrypt(&mut self, key: &Key128, ciphertext: &CipherText) -> BitString {
        self.bump(|t| t.enc_dec += 1);
        crypto::decrypt(key, ciphertext)
    }
}

/// The metered units of one handshake, in protocol order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandshakeStep {
    ExpertLogin,
    ExpertRequest,
    GatewayRelay,
    MobileRelay,
    SensorRespond,
    ExpertConfirm,
}

impl HandshakeStep {
    pub const ALL: [HandshakeStep; 6] = [
        HandshakeStep::ExpertLogin,
        HandshakeStep::ExpertRequest,
        HandshakeStep::GatewayRelay,
        HandshakeStep::MobileRelay,
        HandshakeStep::SensorRespond,
        HandshakeStep::ExpertConfirm,
    ];

    pub fn role(self) -> Role {
        match self {
            HandshakeStep::ExpertLogin | HandshakeStep::ExpertRequest | HandshakeStep::ExpertConfirm => {
                Role::Expert
            }
            HandshakeStep::GatewayRelay => Role::Gateway,
            HandshakeStep::MobileRelay => Role::Mobile,
            HandshakeStep::SensorRespond => Role::Sensor,
        }
    }
}

/// One row of the documented formula-to-tally mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MappingLine {
    pub step: HandshakeStep,
    pub formulas: &'static str,
    pub ops: OpTally,
}

pub const OP_MAPPING: [MappingLine; 6] = [
    MappingLine {
        step: HandshakeStep::ExpertLogin,
        formulas: "N*_i = H(M_id xor H(H(PW) xor r_d) xor S_key)",
        ops: OpTally::new(2, 0, 3),
    },
    MappingLine {
        step: HandshakeStep::ExpertRequest,
        formulas: "H(M_id); CID_i = E_Kl[H(M_id) || M || U_i || SN_j || C || T_1]",
        ops: OpTally::new(1, 1, 0),
    },
    MappingLine {
        step: HandshakeStep::GatewayRelay,
        formulas: "D_Kl[CID_i]; D_Kj[C]; H(M*_id); X = E_KGW-SNj[..]; V_i = E_KGW-U[..]",
        ops: OpTally::new(1, 4, 0),
    },
    MappingLine {
        step: HandshakeStep::MobileRelay,
        formulas: "D_KGW-U[V_i]; V'_i = E_KU-SNj[X || U_i || SN_j || T_5]",
        ops: OpTally::new(0, 2, 0),
    },
    MappingLine {
        step: HandshakeStep::SensorRespond,
        formulas: "D_KU-SNj[V'_i]; D_KGW-SNj[X]; K_ssk = H(M_id xor SN_j xor M); L = E_Kssk[..]",
        ops: OpTally::new(1, 3, 2),
    },
    MappingLine {
        step: HandshakeStep::ExpertConfirm,
        formulas: "K_ssk = H(M_id xor SN_j xor M); D_Kssk[L]",
        ops: OpTally::new(1, 1, 2),
    },
];

pub fn mapping_line(step: HandshakeStep) -> &'static MappingLine {
    OP_MAPPING.iter().find(|l| l.step == step).expect("every step is mapped")
}

/// Per-principal computation cost of one handshake as published.
pub fn reference_computation_cost() -> OpCounter {
    OpCounter::from_iter([
        (Role::Expert, OpTally::new(4, 2, 5)),
        (Role::Gateway, OpTally::new(1, 4, 0)),
        (Role::Mobile, OpTally::new(0, 2, 0)),
        (Role::Sensor, OpTally::new(1, 3, 2)),
    ])
}

/// Per-hop bits of one handshake as published.
pub const REFERENCE_HOP_BITS: [(MessageKind, usize); 4] = [
    (MessageKind::AuthRequest, 672),
    (MessageKind::GatewayToMobile, 288),
    (MessageKind::MobileToSensor, 288),
    (MessageKind::SensorToExpert, 160),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: HandshakeStep,
    pub ops: OpTally,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceWire {
    pub kind: MessageKind,
    pub bits: usize,
}

/// Instrumentation record of a single handshake.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshakeTrace {
    pub steps: Vec<TraceStep>,
    pub wires: Vec<TraceWire>,
}

impl HandshakeTrace {
    pub fn record_step(&mut self, step: HandshakeStep, ops: OpTally) {
        self.steps.push(TraceStep { step, ops });
    }

    pub fn record_wire(&mut self, kind: MessageKind, bits: usize) {
        self.wires.push(TraceWire { kind, bits });
    }

    fn check_steps(&self) -> Result<(), TraceError> {
        let seen: Vec<_> = self.steps.iter().map(|s| s.step).collect();
        if seen != HandshakeStep::ALL {
            return Err(TraceError::Steps(seen));
        }
        Ok(())
    }

    fn check_wires(&self) -> Result<(), TraceError> {
        let seen: Vec<_> = self.wires.iter().map(|w| w.kind).collect();
        if seen != MessageKind::ALL {
            return Err(TraceError::Wires(seen));
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.check_steps().is_ok() && self.check_wires().is_ok()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace does not cover every handshake step once, in order: {0:?}")]
    Steps(Vec<HandshakeStep>),
    #[error("trace does not carry the four handshake messages in order: {0:?}")]
    Wires(Vec<MessageKind>),
}

/// Per-principal op tallies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub per_role: BTreeMap<Role, OpTally>,
}

impl OpCounter {
    pub fn get(&self, role: Role) -> OpTally {
        self.per_role.get(&role).copied().unwrap_or_default()
    }

    pub fn total(&self) -> OpTally {
        self.per_role.values().fold(OpTally::default(), |acc, t| acc + *t)
    }
}

impl FromIterator<(Role, OpTally)> for OpCounter {
    fn from_iter<I: IntoIterator<Item = (Role, OpTally)>>(iter: I) -> Self {
        let mut per_role = BTreeMap::new();
        for (role, t) in iter {
            *per_role.entry(role).or_default() += t;
        }
        Self { per_role }
    }
}

pub fn count_handshake_ops(trace: &HandshakeTrace) -> Result<OpCounter, TraceError> {
    trace.check_steps()?;
    let mut counter: OpCounter = Role::ALL.iter().map(|r| (*r, OpTally::default())).collect();
    for s in &trace.steps {
        *counter.per_role.entry(s.step.role()).or_default() += s.ops;
    }
    Ok(counter)
}

/// A mapping line whose measured tally differs from the documented one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingDiscrepancy {
    pub line: MappingLine,
    pub measured: OpTally,
}

pub fn mapping_discrepancies(trace: &HandshakeTrace) -> Result<Vec<MappingDiscrepancy>, TraceError> {
    trace.check_steps()?;
    Ok(trace
        .steps
        .iter()
        .filter_map(|s| {
            let line = *mapping_line(s.step);
            (line.ops != s.ops).then_some(MappingDiscrepancy { line, measured: s.ops })
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopBits {
    pub kind: MessageKind,
    pub from: Role,
    pub to: Role,
    pub bits: usize,
}

pub fn hop_endpoints(kind: MessageKind) -> (Role, Role) {
    match kind {
        MessageKind::AuthRequest => (Role::Expert, Role::Gateway),
        MessageKind::GatewayToMobile => (Role::Gateway, Role::Mobile),
        MessageKind::MobileToSensor => (Role::Mobile, Role::Sensor),
        MessageKind::SensorToExpert => (Role::Sensor, Role::Expert),
    }
}

/// Bits sent per hop during one handshake.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub hops: Vec<HopBits>,
}

impl CommLedger {
    pub fn total_bits(&self) -> usize {
        self.hops.iter().map(|h| h.bits).sum()
    }

    pub fn bits(&self) -> Vec<usize> {
        self.hops.iter().map(|h| h.bits).collect()
    }
}

pub fn ledger_from_trace(trace: &HandshakeTrace) -> Result<CommLedger, TraceError> {
    trace.check_wires()?;
    let hops = trace
        .wires
        .iter()
        .map(|w| {
            let (from, to) = hop_endpoints(w.kind);
            HopBits { kind: w.kind, from, to, bits: w.bits }
        })
        .collect();
    Ok(CommLedger { hops })
}

fn role_label(role: Role) -> &'static str {
    match role {
        Role::Expert => "Medical expert",
        Role::Gateway => "Gateway",
        Role::Mobile => "Mobile device",
        Role::Sensor => "Sensor",
    }
}

fn hop_label(kind: MessageKind) -> &'static str {
    match kind {
        MessageKind::AuthRequest => "M_id -> GW",
        MessageKind::GatewayToMobile => "GW -> U_i",
        MessageKind::MobileToSensor => "U_i -> SN_j",
        MessageKind::SensorToExpert => "SN_j -> M_id",
    }
}

/// Plain-text tables of computation and communication cost.
pub fn render_cost_tables(ops: &OpCounter, ledger: &CommLedger) -> String {
    let mut out = String::new();
    out.push_str("Computation cost\n");
    out.push_str(&format!("  {:<16} {}\n", "Node", "Cost"));
    for role in Role::ALL {
        out.push_str(&format!("  {:<16} {}\n", role_label(role), ops.get(role)));
    }
    out.push_str(&format!("  {:<16} {}\n", "Total", ops.total()));
    out.push_str("Communication cost\n");
    out.push_str(&format!("  {:<16} {}\n", "Hop", "Bits"));
    for hop in &ledger.hops {
        out.push_str(&format!("  {:<16} {}\n", hop_label(hop.kind), hop.bits));
    }
    out.push_str(&format!("  {:<16} {}\n", "Total", ledger.total_bits()));
    out
}

/// Sanity relation between the published vector and the codec constants.
pub fn reference_total_bits() -> usize {
    debug_assert_eq!(
        REFERENCE_HOP_BITS.iter().map(|(_, b)| b).sum::<usize>(),
        HANDSHAKE_TOTAL_BITS
    );
    HANDSHAKE_TOTAL_BITS
}
