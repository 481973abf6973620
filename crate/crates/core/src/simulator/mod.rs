//! Deterministic discrete-event harness.
//!
//! Every expert runs a handshake with every registered sensor, one at a
//! time. Messages cross public hops with a fixed latency plus optional
//! seeded jitter, and an adversary [`Tap`] sees each hop. Simulated time
//! is kept in microseconds; principals read the protocol clock as whole
//! seconds since `epoch_s`.
//!
//! When any principal rejects, the session is marked rejected and the
//! expert moves on to its next handshake; the harness stands in for the
//! expert-side timeout the protocol leaves unspecified.
//!
//! Three independent ChaCha streams derive from the seed: protocol
//! randomness and registration, channel jitter, and adversary choices.

pub mod adversary;
pub mod closure;
pub mod config;
pub mod queue;
pub mod report;
pub mod traffic;

use std::collections::VecDeque;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{decode, encode, MessageKind, MobileToSensor, ProtocolMessage, ViPlain, ViPrimePlain, WireBits};
use crate::crypto::{decrypt, encrypt, Timestamp32};
use crate::entities::{ProtocolError, RejectReason, Registry, SessionKey};
use crate::ids::{Nonce64, Role};
use crate::metrics::{count_handshake_ops, ledger_from_trace, HandshakeStep, HandshakeTrace, OpTally};
use crate::codec::Plaintext;

pub use adversary::{AdversaryModel, Forgery, SimClock, Tap};
pub use closure::{Knowledge, KnowledgeSummary};
pub use config::{ciphertext_bits, ConfigError, NetworkConfig, ScenarioConfig, TrafficConfig};
pub use queue::EventQueue;
pub use report::{
    ClosureReport, EventKind, EventRecord, Exposure, Origin, ScenarioReport, SessionOutcome, SessionReport, Summary,
};
pub use traffic::{PacketRecord, TrafficStats};

/// Index of a principal in the registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrincipalId {
    Expert(usize),
    Gateway,
    Mobile(usize),
    Sensor(usize),
}

impl PrincipalId {
    pub fn role(self) -> Role {
        match self {
            PrincipalId::Expert(_) => Role::Expert,
            PrincipalId::Gateway => Role::Gateway,
            PrincipalId::Mobile(_) => Role::Mobile,
            PrincipalId::Sensor(_) => Role::Sensor,
        }
    }
}

#[derive(Clone, Debug)]
struct Delivery {
    session: usize,
    kind: MessageKind,
    to: PrincipalId,
    wire: WireBits,
}

#[derive(Clone, Debug)]
enum Event {
    Start(usize),
    Deliver(Delivery),
}

#[derive(Clone, Debug)]
struct Session {
    report: SessionReport,
    expert: usize,
    mobile: usize,
    sensor: usize,
    nonce: Option<Nonce64>,
    sensor_key: Option<SessionKey>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    clock: SimClock,
    registry: Registry,
    rng: ChaCha8Rng,
    net_rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    queue: EventQueue<Event>,
    now_us: u64,
    tap: Tap,
    sessions: Vec<Session>,
    plans: Vec<VecDeque<usize>>,
    active: Vec<Option<usize>>,
    events: Vec<EventRecord>,
}

fn stream(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, 0);
        let mut registry = cfg.registry_config().build(cfg.delta_tc, &mut rng)?;
        registry.set_instrumented(cfg.instrument);
        let n_experts = registry.experts.len();
        let n_sensors = registry.sensors.len();
        let mut queue = EventQueue::new();
        for e in 0..n_experts {
            queue.push(0, Event::Start(e));
        }
        Ok(Self {
            clock: SimClock { epoch_s: cfg.epoch_s },
            tap: Tap::new(cfg.adversary.clone()),
            net_rng: stream(cfg.seed, 1),
            adv_rng: stream(cfg.seed, 2),
            cfg,
            registry,
            rng,
            queue,
            now_us: 0,
            sessions: Vec::new(),
            plans: vec![(0..n_sensors).collect(); n_experts],
            active: vec![None; n_experts],
            events: Vec::new(),
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn now_us(&self) -> u64 {
        self.now_us
    }

    /// Processes events until the queue is empty.
    pub fn run(&mut self) {
        while let Some((t, ev)) = self.queue.pop() {
            debug_assert!(t >= self.now_us);
            self.now_us = t;
            match ev {
                Event::Start(e) => self.start(e),
                Event::Deliver(d) => self.deliver(d),
            }
        }
    }

    fn ts(&self) -> Timestamp32 {
        self.clock.ts(self.now_us)
    }

    fn log(&mut self, session: usize, kind: EventKind) {
        self.events.push(EventRecord { t_us: self.now_us, session: session as u32, kind });
    }

    fn new_session(&mut self, origin: Origin, expert: usize, mobile: usize, sensor: usize) -> usize {
        let id = self.sessions.len();
        self.sessions.push(Session {
            report: SessionReport {
                session: id as u32,
                origin,
                touched: origin == Origin::Adversary,
                expert: self.registry.experts[expert].m_id(),
                mobile: self.registry.mobiles[mobile].u_i(),
                sensor: self.registry.sensors[sensor].sn_j(),
                outcome: SessionOutcome::Incomplete,
                started_us: self.now_us,
                finished_us: None,
                key: None,
                sensor_key: None,
                hops: None,
                ops: None,
                trace: HandshakeTrace::default(),
            },
            expert,
            mobile,
            sensor,
            nonce: None,
            sensor_key: None,
        });
        id
    }

    fn step(&mut self, id: usize, step: HandshakeStep, ops: OpTally) {
        self.sessions[id].report.trace.record_step(step, ops);
    }

    fn start(&mut self, e: usize) {
        let Some(s) = self.plans[e].pop_front() else { return };
        let owner = self.registry.sensors[s].owner();
        let m = self.registry.mobile_index(owner).expect("sensor owners are registered");
        let id = self.new_session(Origin::Honest, e, m, s);
        self.active[e] = Some(id);
        let r = &self.sessions[id].report;
        let (m_id, u_i, sn_j) = (r.expert, r.mobile, r.sensor);
        self.log(id, EventKind::Start { expert: m_id, mobile: u_i, sensor: sn_j });

        let now = self.ts();
        let pw = self.registry.passwords[e].clone();
        let dev = &mut self.registry.experts[e];
        let before = dev.meter.tally();
        let login = dev.login(m_id, &pw);
        let ops = dev.meter.tally() - before;
        self.step(id, HandshakeStep::ExpertLogin, ops);
        if let Err(err) = login {
            return self.reject(id, Role::Expert, None, &err);
        }

        let dev = &mut self.registry.experts[e];
        let before = dev.meter.tally();
        let req = dev.start_auth(u_i, sn_j, now, &mut self.rng);
        let ops = dev.meter.tally() - before;
        self.sessions[id].nonce = dev.pending().map(|p| p.nonce);
        self.step(id, HandshakeStep::ExpertRequest, ops);
        match req {
            Ok(req) => self.send(id, PrincipalId::Expert(e), PrincipalId::Gateway, req.into()),
            Err(err) => self.reject(id, Role::Expert, None, &err),
        }
    }

    fn send(&mut self, id: usize, from: PrincipalId, to: PrincipalId, msg: ProtocolMessage) {
        let kind = msg.kind();
        let wire = encode(&msg).expect("principals emit well-formed messages");
        self.sessions[id].report.trace.record_wire(kind, wire.len());
        self.log(id, EventKind::Send { kind, from: from.role(), to: to.role(), bits: wire.len() });
        let jitter = match self.cfg.jitter_us {
            0 => 0,
            j => self.net_rng.gen_range(0..=j),
        };
        let arrive = self.now_us + self.cfg.latency_us + jitter;
        let honest = self.sessions[id].report.origin == Origin::Honest;
        let (out, forged) = self.tap.intercept(kind, wire, arrive, honest, self.clock, &mut self.adv_rng);
        if out.touched {
            self.sessions[id].report.touched = true;
            self.log(id, EventKind::Adversary { kind, note: out.note.unwrap_or_default() });
        }
        self.queue.push(out.at_us, Event::Deliver(Delivery { session: id, kind, to, wire: out.wire }));
        for f in forged {
            let s = &self.sessions[id];
            let fid = self.new_session(Origin::Adversary, s.expert, s.mobile, s.sensor);
            self.log(fid, EventKind::Inject { kind: f.kind, note: f.note });
            self.queue.push(f.at_us, Event::Deliver(Delivery { session: fid, kind: f.kind, to, wire: f.wire }));
        }
    }

    fn deliver(&mut self, d: Delivery) {
        let id = d.session;
        let role = d.to.role();
        let msg = match decode(d.kind, &d.wire) {
            Ok(msg) => msg,
            Err(err) => return self.reject(id, role, Some(d.kind), &err.into()),
        };
        let now = self.ts();
        let (expert, mobile, sensor) = {
            let s = &self.sessions[id];
            (s.expert, s.mobile, s.sensor)
        };
        macro_rules! metered {
            ($principal:expr, $step:expr, $call:expr) => {{
                let before = $principal.meter.tally();
                let out = $call;
                let ops = $principal.meter.tally() - before;
                self.step(id, $step, ops);
                match out {
                    Ok(v) => {
                        self.log(id, EventKind::Accept { by: role, kind: d.kind });
                        v
                    }
                    Err(err) => return self.reject(id, role, Some(d.kind), &err),
                }
            }};
        }
        match (d.to, msg) {
            (PrincipalId::Gateway, ProtocolMessage::AuthRequest(m)) => {
                let gw = &mut self.registry.gateway;
                let out = metered!(gw, HandshakeStep::GatewayRelay, gw.handle_auth(&m, now));
                self.send(id, PrincipalId::Gateway, PrincipalId::Mobile(mobile), out.into());
            }
            (PrincipalId::Mobile(i), ProtocolMessage::GatewayToMobile(m)) => {
                let mob = &mut self.registry.mobiles[i];
                let out = metered!(mob, HandshakeStep::MobileRelay, mob.forward(&m, now));
                self.send(id, PrincipalId::Mobile(i), PrincipalId::Sensor(sensor), out.into());
            }
            (PrincipalId::Sensor(i), ProtocolMessage::MobileToSensor(m)) => {
                let sen = &mut self.registry.sensors[i];
                let (out, key) = metered!(sen, HandshakeStep::SensorRespond, sen.handle(&m, now));
                self.sessions[id].sensor_key = Some(key);
                self.sessions[id].report.sensor_key = Some(key.digest);
                self.send(id, PrincipalId::Sensor(i), PrincipalId::Expert(expert), out.into());
            }
            (PrincipalId::Expert(e), ProtocolMessage::SensorToExpert(m)) => {
                let dev = &mut self.registry.experts[e];
                let key = metered!(dev, HandshakeStep::ExpertConfirm, dev.finish(&m, now));
                if self.sessions[id].sensor_key != Some(key) {
                    return self.reject(id, Role::Expert, Some(d.kind), &ProtocolError::ProtocolViolation("key confirmed for another session"));
                }
                self.establish(id, key);
            }
            _ => self.reject(id, role, Some(d.kind), &ProtocolError::ProtocolViolation("message sent to the wrong principal")),
        }
    }

    fn establish(&mut self, id: usize, key: SessionKey) {
        self.log(id, EventKind::Established { key: key.digest });
        let now = self.now_us;
        let s = &mut self.sessions[id];
        s.report.outcome = SessionOutcome::KeyEstablished;
        s.report.finished_us = Some(now);
        s.report.key = Some(key.digest);
        s.report.hops = ledger_from_trace(&s.report.trace).ok();
        s.report.ops = count_handshake_ops(&s.report.trace).ok();
        self.release(id);
    }

    fn reject(&mut self, id: usize, by: Role, kind: Option<MessageKind>, err: &ProtocolError) {
        let reason = err.reason();
        self.log(id, EventKind::Reject { by, kind, reason });
        let now = self.now_us;
        let s = &mut self.sessions[id];
        if s.report.outcome == SessionOutcome::Incomplete {
            s.report.outcome = SessionOutcome::Rejected { by, reason };
            s.report.finished_us = Some(now);
        }
        if self.active[s.expert] == Some(id) {
            self.registry.experts[s.expert].abandon();
        }
        self.release(id);
    }

    /// Frees the expert if `id` is its current handshake and queues the next.
    fn release(&mut self, id: usize) {
        let e = self.sessions[id].expert;
        if self.active[e] == Some(id) {
            self.active[e] = None;
            self.queue.push(self.now_us, Event::Start(e));
        }
    }

    /// What the compromised mobile at index `m` can compute, closed over
    /// everything the tap saw.
    fn knowledge_of_mobile(&self, m: usize) -> Knowledge {
        let mobile = &self.registry.mobiles[m];
        let mut k = Knowledge::new();
        for key in mobile.held_keys() {
            k.add_key(key);
        }
        k.add_identity(mobile.u_i(), Role::Mobile);
        for sn in mobile.sensor_keys().keys() {
            k.add_identity(*sn, Role::Sensor);
        }
        for o in self.tap.observed() {
            k.observe(o.kind, &o.wire);
        }
        k
    }

    fn exposure<'a>(&self, k: &Knowledge, sessions: impl Iterator<Item = &'a Session>) -> Exposure {
        let mut x = Exposure::default();
        for s in sessions.filter(|s| s.report.outcome == SessionOutcome::KeyEstablished) {
            x.sessions += 1;
            let key = s.sensor_key.expect("established sessions have a sensor key");
            x.session_keys += usize::from(k.knows_session_key(&key));
            x.expert_ids += usize::from(k.knows_identity(s.report.expert));
            x.nonces += usize::from(s.nonce.is_some_and(|n| k.knows_nonce(n)));
        }
        x
    }

    pub fn closure_report(&self, m: usize) -> ClosureReport {
        let mut k = self.knowledge_of_mobile(m);
        k.close();
        let exposure = self.exposure(&k, self.sessions.iter());

        let mut inv = self.knowledge_of_mobile(m);
        let u_i = self.registry.mobiles[m].u_i();
        for sensor in self.registry.sensors.iter().filter(|s| s.owner() == u_i) {
            inv.add_key(self.registry.gateway.sensor(sensor.sn_j()).expect("registered").k_gw_snj);
        }
        inv.close();
        let inversion = self.exposure(&inv, self.sessions.iter().filter(|s| s.mobile == m));
        ClosureReport { mobile: u_i, knowledge: k.summary(), exposure, inversion }
    }

    /// The compromised mobile reopens the first `V_i` it relayed and sends
    /// the sensor a fresh `V'_i` around the captured `X`.
    fn inject_rewrapped_x(&mut self, m: usize) -> bool {
        let mobile = &self.registry.mobiles[m];
        let found = self.sessions.iter().find_map(|s| {
            if s.mobile != m || s.report.origin != Origin::Honest {
                return None;
            }
            let wire = self.tap.observed().iter().find(|o| {
                o.kind == MessageKind::GatewayToMobile
                    && matches!(decode(o.kind, &o.wire), Ok(ProtocolMessage::GatewayToMobile(g))
                        if ViPlain::from_padded(&decrypt(&mobile.k_gw_u(), &g.vi)).is_ok_and(|p| p.t3 == g.t3 && p.sn_j == s.report.sensor))
            })?;
            let Ok(ProtocolMessage::GatewayToMobile(g)) = decode(wire.kind, &wire.wire) else { return None };
            let vi = ViPlain::from_padded(&decrypt(&mobile.k_gw_u(), &g.vi)).ok()?;
            Some((s.expert, s.sensor, vi))
        });
        let Some((expert, sensor, vi)) = found else { return false };
        let now = self.ts();
        let k_u_snj = self.registry.mobiles[m].sensor_keys()[&vi.sn_j];
        let plain = ViPrimePlain { x: vi.x, u_i: vi.u_i, sn_j: vi.sn_j, t5: now };
        let sealed = encrypt(&k_u_snj, &plain.to_bits()).expect("non-empty plaintext");
        let msg: ProtocolMessage = MobileToSensor::assemble(&plain, sealed).into();
        let id = self.new_session(Origin::Adversary, expert, m, sensor);
        self.log(id, EventKind::Inject { kind: MessageKind::MobileToSensor, note: "captured X rewrapped by the mobile".into() });
        self.send(id, PrincipalId::Mobile(m), PrincipalId::Sensor(sensor), msg);
        true
    }

    pub fn into_report(self, closure: Option<ClosureReport>, packets: Vec<PacketRecord>) -> ScenarioReport {
        ScenarioReport {
            scenario: self.cfg.adversary.name().to_string(),
            seed: self.cfg.seed,
            sessions: self.sessions.into_iter().map(|s| s.report).collect(),
            events: self.events,
            closure,
            packets,
            end_us: self.now_us,
        }
    }

    fn established_sources(&self) -> Vec<u32> {
        self.sessions
            .iter()
            .filter(|s| s.report.outcome == SessionOutcome::KeyEstablished)
            .map(|s| s.report.session)
            .collect()
    }
}

/// Runs whatever adversary the configuration names.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, ConfigError> {
    if let AdversaryModel::CompromisedMobile { mobile } = cfg.adversary {
        return run_compromised_mobile(cfg, mobile);
    }
    let mut sim = Simulation::new(cfg.clone())?;
    sim.run();
    Ok(sim.into_report(None, Vec::new()))
}

fn with_adversary(cfg: &ScenarioConfig, adversary: AdversaryModel) -> ScenarioConfig {
    ScenarioConfig { adversary, ..cfg.clone() }
}

pub fn run_honest(cfg: &ScenarioConfig) -> Result<ScenarioReport, ConfigError> {
    run_scenario(&with_adversary(cfg, AdversaryModel::Passive))
}

pub fn run_replay_attack(
    cfg: &ScenarioConfig,
    target: MessageKind,
    delay_s: u32,
    rewrite_timestamp: bool,
) -> Result<ScenarioReport, ConfigError> {
    run_scenario(&with_adversary(cfg, AdversaryModel::Replay { target, delay_s, rewrite_timestamp }))
}

pub fn run_tamper_attack(cfg: &ScenarioConfig, target: MessageKind, bit: usize) -> Result<ScenarioReport, ConfigError> {
    run_scenario(&with_adversary(cfg, AdversaryModel::Tamper { target, bit }))
}

pub fn run_masquerade_attack(
    cfg: &ScenarioConfig,
    forgery: Forgery,
    attempts: u32,
) -> Result<ScenarioReport, ConfigError> {
    run_scenario(&with_adversary(cfg, AdversaryModel::Masquerade { forgery, attempts }))
}

/// Honest run with mobile `mobile` under adversary control, then the
/// knowledge closure, then a rewrapped-`X` replay to the sensor.
pub fn run_compromised_mobile(cfg: &ScenarioConfig, mobile: usize) -> Result<ScenarioReport, ConfigError> {
    let mut sim = Simulation::new(with_adversary(cfg, AdversaryModel::CompromisedMobile { mobile }))?;
    sim.run();
    let closure = sim.closure_report(mobile);
    if sim.inject_rewrapped_x(mobile) {
        sim.run();
    }
    Ok(sim.into_report(Some(closure), Vec::new()))
}

/// Throughput and end-to-end delay of post-handshake data traffic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement<F> {
    pub sources: usize,
    pub runs: Vec<TrafficStats<F>>,
    pub mean: TrafficStats<F>,
    pub report: ScenarioReport,
}

pub type Measurement64 = Measurement<f64>;
pub type Measurement32 = Measurement<f32>;

/// One honest run per repetition (seeds `seed`, `seed + 1`, ...). After
/// the last handshake, plus one second, every keyed sensor starts sending.
/// The returned report is the first repetition's.
pub fn measure_with<F: Float>(cfg: &ScenarioConfig) -> Result<Measurement<F>, ConfigError> {
    let mut runs = Vec::new();
    let mut first = None;
    let mut sources = 0;
    for r in 0..cfg.traffic.repetitions {
        let rep = ScenarioConfig { seed: cfg.seed.wrapping_add(u64::from(r)), adversary: AdversaryModel::Passive, ..cfg.clone() };
        let mut sim = Simulation::new(rep)?;
        sim.run();
        let srcs = sim.established_sources();
        sources = srcs.len();
        let packets = traffic::simulate(&srcs, sim.now_us() + 1_000_000, &cfg.traffic);
        let stats = TrafficStats::from_records(&packets)
            .ok_or_else(|| ConfigError::Invalid("no handshake established a key, so no traffic flowed".into()))?;
        runs.push(stats);
        if first.is_none() {
            first = Some(sim.into_report(None, packets));
        }
    }
    let mean = TrafficStats::mean(&runs).expect("at least one repetition");
    Ok(Measurement { sources, runs, mean, report: first.expect("at least one repetition") })
}

pub fn measure(cfg: &ScenarioConfig) -> Result<Measurement64, ConfigError> {
    measure_with::<f64>(cfg)
}

/// Rejection reason a replayed message of `kind` is expected to hit.
pub fn expected_replay_reason(rewrite_timestamp: bool) -> RejectReason {
    if rewrite_timestamp {
        RejectReason::EchoMismatch
    } else {
        RejectReason::WindowExceeded
    }
}
