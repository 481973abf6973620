//! Scenario results and their line-delimited JSON form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::MessageKind;
use crate::crypto::Digest160;
use crate::entities::RejectReason;
use crate::ids::{Identity, Role};
use crate::metrics::{CommLedger, HandshakeTrace, OpCounter};

use super::closure::KnowledgeSummary;
use super::traffic::PacketRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SessionOutcome {
    KeyEstablished,
    /// The first rejection on the message path.
    Rejected { by: Role, reason: RejectReason },
    Incomplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Honest,
    Adversary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session: u32,
    pub origin: Origin,
    /// Some message of this session was altered, delayed or forged.
    pub touched: bool,
    pub expert: Identity,
    pub mobile: Identity,
    pub sensor: Identity,
    pub outcome: SessionOutcome,
    pub started_us: u64,
    pub finished_us: Option<u64>,
    /// Expert side.
    pub key: Option<Digest160>,
    /// Sensor side, if the sensor got as far as deriving it.
    pub sensor_key: Option<Digest160>,
    pub hops: Option<CommLedger>,
    pub ops: Option<OpCounter>,
    #[serde(skip)]
    pub trace: HandshakeTrace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    Start { expert: Identity, mobile: Identity, sensor: Identity },
    Send { kind: MessageKind, from: Role, to: Role, bits: usize },
    Adversary { kind: MessageKind, note: String },
    Inject { kind: MessageKind, note: String },
    Accept { by: Role, kind: MessageKind },
    Reject { by: Role, kind: Option<MessageKind>, reason: RejectReason },
    Established { key: Digest160 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_us: u64,
    pub session: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Counts of session secrets present in a knowledge closure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exposure {
    /// Established sessions whose secrets were checked.
    pub sessions: usize,
    pub session_keys: usize,
    pub expert_ids: usize,
    pub nonces: usize,
}

impl Exposure {
    pub fn is_clean(&self) -> bool {
        self.session_keys == 0 && self.expert_ids == 0 && self.nonces == 0
    }

    pub fn is_total(&self) -> bool {
        self.sessions > 0 && self.expert_ids == self.sessions && self.nonces == self.sessions
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub mobile: Identity,
    pub knowledge: KnowledgeSummary,
    /// Against every established session in the run.
    pub exposure: Exposure,
    /// The same closure seeded additionally with the `K_GW-SNj` of the
    /// mobile's sensors, against the sessions through that mobile.
    pub inversion: Exposure,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub sessions: usize,
    pub established: usize,
    pub rejected: usize,
    pub incomplete: usize,
    /// Sessions the adversary touched that still established a key.
    pub adversary_acceptances: usize,
    pub rejections: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub sessions: Vec<SessionReport>,
    pub events: Vec<EventRecord>,
    pub closure: Option<ClosureReport>,
    pub packets: Vec<PacketRecord>,
    pub end_us: u64,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Line<'a> {
    Event(&'a EventRecord),
    Session(&'a SessionReport),
    Packet(&'a PacketRecord),
    Closure(&'a ClosureReport),
    Summary(&'a Summary),
}

impl ScenarioReport {
    pub fn established(&self) -> impl Iterator<Item = &SessionReport> {
        self.sessions.iter().filter(|s| s.outcome == SessionOutcome::KeyEstablished)
    }

    pub fn honest(&self) -> impl Iterator<Item = &SessionReport> {
        self.sessions.iter().filter(|s| s.origin == Origin::Honest)
    }

    pub fn adversary_acceptances(&self) -> usize {
        self.established().filter(|s| s.touched).count()
    }

    pub fn summary(&self) -> Summary {
        let mut rejections = BTreeMap::new();
        let (mut established, mut rejected, mut incomplete) = (0, 0, 0);
        for s in &self.sessions {
            match s.outcome {
                SessionOutcome::KeyEstablished => established += 1,
                SessionOutcome::Rejected { by, reason } => {
                    rejected += 1;
                    *rejections.entry(format!("{by}:{reason}")).or_insert(0) += 1;
                }
                SessionOutcome::Incomplete => incomplete += 1,
            }
        }
        Summary {
            scenario: self.scenario.clone(),
            seed: self.seed,
            sessions: self.sessions.len(),
            established,
            rejected,
            incomplete,
            adversary_acceptances: self.adversary_acceptances(),
            rejections,
        }
    }

    /// One JSON object per line: events, sessions, packets, closure, then
    /// the summary. Field order is fixed by the record types.
    pub fn to_json_lines(&self) -> String {
        let summary = self.summary();
        let lines = self
            .events
            .iter()
            .map(Line::Event)
            .chain(self.sessions.iter().map(Line::Session))
            .chain(self.packets.iter().map(Line::Packet))
            .chain(self.closure.iter().map(Line::Closure))
            .chain(std::iter::once(Line::Summary(&summary)));
        let mut out = String::new();
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("report records serialize"));
            out.push('\n');
        }
        out
    }
}
