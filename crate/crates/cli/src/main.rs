//! `wban`: run registrations, handshakes, attacks, cost reports, BAN checks
//! and traffic measurements from the command line.
//!
//! A short summary goes to stdout. Structured records (one JSON object per
//! line) go to `--output`; `--output -` writes them to stdout instead.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wban_auth::ban::{self, BanReport, Theory};
use wban_auth::metrics::{mapping_discrepancies, reference_computation_cost, render_cost_tables, REFERENCE_HOP_BITS};
use wban_auth::simulator::{
    self, AdversaryModel, Forgery, Origin, ScenarioReport, SessionOutcome, SessionReport,
};
use wban_auth::{FreshnessWindow, MessageKind, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "wban", version, about = "WBAN expert-to-sensor authentication toolkit")]
struct Cli {
    /// Seed for every random draw; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scenario config (TOML).
    #[arg(long, global = true, env = "WBAN_CONFIG")]
    config: Option<PathBuf>,
    /// Where to write JSON-lines records; `-` for stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Freshness window in seconds; overrides the config file.
    #[arg(long = "delta-tc", global = true)]
    delta_tc: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register the configured principals and list them.
    Register(NetworkArgs),
    /// Run honest handshakes for every expert and sensor.
    Handshake(NetworkArgs),
    /// Run one adversary scenario; fails if any touched session is accepted.
    Attack(AttackArgs),
    /// Per-principal op counts and per-hop bits of one handshake.
    Costs,
    /// Check the BAN goals of the handshake.
    BanVerify(BanArgs),
    /// Throughput and end-to-end delay as the sensor count grows.
    Measure(MeasureArgs),
}

#[derive(Args, Debug, Default)]
struct NetworkArgs {
    #[arg(long)]
    experts: Option<u32>,
    #[arg(long)]
    patients: Option<u32>,
    /// Sensors per patient.
    #[arg(long)]
    sensors: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AttackKind {
    Replay,
    Tamper,
    Masquerade,
    CompromisedMobile,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ForgeryArg {
    RandomCid,
    RandomCredential,
}

#[derive(Args, Debug)]
struct AttackArgs {
    /// Defaults to the adversary in the config file.
    #[arg(long)]
    kind: Option<AttackKind>,
    /// Message kind to replay or tamper with.
    #[arg(long, default_value = "auth-request")]
    target: MessageKind,
    /// Replay delay in seconds.
    #[arg(long, default_value_t = 10)]
    delay: u32,
    /// Set the replayed cleartext timestamp to the delivery time.
    #[arg(long)]
    rewrite: bool,
    /// Wire bit to flip.
    #[arg(long, default_value_t = 0)]
    bit: usize,
    #[arg(long, value_enum, default_value = "random-cid")]
    forgery: ForgeryArg,
    #[arg(long, default_value_t = 50)]
    attempts: u32,
    /// Index of the compromised mobile.
    #[arg(long, default_value_t = 0)]
    mobile: usize,
    #[command(flatten)]
    network: NetworkArgs,
}

#[derive(Args, Debug)]
struct BanArgs {
    /// Theory file; defaults to the built-in handshake theory.
    #[arg(long)]
    theory: Option<PathBuf>,
    /// Assumption labels to remove before deriving.
    #[arg(long = "drop", value_name = "LABEL")]
    drop: Vec<String>,
    /// Print the proof of every derived goal.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long, default_value_t = 1)]
    experts: u32,
    #[arg(long, default_value_t = 1)]
    patients: u32,
    /// Sweep sensors per patient from 1 to this value.
    #[arg(long, default_value_t = 10)]
    max_sensors: u32,
    /// Runs per point; overrides the config file.
    #[arg(long)]
    repetitions: Option<u32>,
}

enum Failure {
    /// Bad input: exit 2.
    Usage(String),
    /// The scenario ran but an expectation did not hold: exit 1.
    Assertion(String),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Collects structured records and human text for one invocation.
#[derive(Default)]
struct Out {
    text: String,
    records: String,
}

impl Out {
    fn say(&mut self, line: impl AsRef<str>) {
        self.text.push_str(line.as_ref());
        self.text.push('\n');
    }

    fn record(&mut self, v: Value) {
        self.records.push_str(&v.to_string());
        self.records.push('\n');
    }

    fn report(&mut self, r: &ScenarioReport) {
        self.records.push_str(&r.to_json_lines());
    }
}

fn base_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p).map_err(usage)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(d) = cli.delta_tc {
        cfg.delta_tc = FreshnessWindow::new(d).ok_or_else(|| usage("--delta-tc must be at least 1"))?;
    }
    Ok(cfg)
}

fn apply_network(cfg: &mut ScenarioConfig, n: &NetworkArgs) {
    if let Some(e) = n.experts {
        cfg.network.experts = e;
    }
    if let Some(p) = n.patients {
        cfg.network.patients = p;
    }
    if let Some(s) = n.sensors {
        cfg.network.sensors_per_patient = s;
    }
}

fn outcome_text(o: &SessionOutcome) -> String {
    match o {
        SessionOutcome::KeyEstablished => "KeyEstablished".into(),
        SessionOutcome::Rejected { by, reason } => format!("Rejected by {by} ({reason})"),
        SessionOutcome::Incomplete => "Incomplete".into(),
    }
}

fn session_line(s: &SessionReport) -> String {
    let origin = match s.origin {
        Origin::Honest => "",
        Origin::Adversary => " [forged]",
    };
    let touched = if s.touched { " [touched]" } else { "" };
    format!(
        "session {:>3}  expert {} -> sensor {} via {}: {}{origin}{touched}",
        s.session,
        s.expert,
        s.sensor,
        s.mobile,
        outcome_text(&s.outcome)
    )
}

fn summary_line(out: &mut Out, r: &ScenarioReport) {
    let s = r.summary();
    out.say(format!(
        "{}: {} sessions, {} established, {} rejected, {} incomplete, {} adversary acceptances",
        s.scenario, s.sessions, s.established, s.rejected, s.incomplete, s.adversary_acceptances
    ));
    for (k, n) in &s.rejections {
        out.say(format!("  rejected {k}: {n}"));
    }
}

fn register(cfg: ScenarioConfig, out: &mut Out) -> Outcome {
    let sim = simulator::Simulation::new(cfg).map_err(usage)?;
    let reg = sim.registry();
    out.say(format!("gateway {}", reg.gateway.id()));
    out.record(json!({"record": "principal", "role": "gateway", "id": reg.gateway.id()}));
    for e in &reg.experts {
        out.say(format!("expert  {}", e.m_id()));
        out.record(json!({"record": "principal", "role": "expert", "id": e.m_id()}));
    }
    for m in &reg.mobiles {
        out.say(format!("mobile  {}  ({} sensors)", m.u_i(), m.sensor_keys().len()));
        out.record(json!({"record": "principal", "role": "mobile", "id": m.u_i()}));
    }
    for s in &reg.sensors {
        out.say(format!("sensor  {}  owner {}", s.sn_j(), s.owner()));
        out.record(json!({"record": "principal", "role": "sensor", "id": s.sn_j(), "owner": s.owner()}));
    }
    out.say(format!(
        "registered {} experts, {} mobiles, {} sensors",
        reg.experts.len(),
        reg.mobiles.len(),
        reg.sensors.len()
    ));
    Ok(())
}

fn handshake(cfg: ScenarioConfig, out: &mut Out) -> Outcome {
    let r = simulator::run_honest(&cfg).map_err(usage)?;
    for s in &r.sessions {
        out.say(session_line(s));
        if let Some(h) = &s.hops {
            let hops: Vec<String> = h.hops.iter().map(|b| format!("{} {}", b.kind, b.bits)).collect();
            out.say(format!("  bits: {} (total {})", hops.join(", "), h.total_bits()));
        }
    }
    summary_line(out, &r);
    out.report(&r);
    let failed = r.honest().filter(|s| s.outcome != SessionOutcome::KeyEstablished).count();
    if failed > 0 {
        return Err(Failure::Assertion(format!("{failed} honest sessions did not establish a key")));
    }
    Ok(())
}

fn attack(mut cfg: ScenarioConfig, a: &AttackArgs, out: &mut Out) -> Outcome {
    apply_network(&mut cfg, &a.network);
    let model = match a.kind {
        None if cfg.adversary == AdversaryModel::Passive => {
            return Err(usage("no --kind given and the config names no adversary"))
        }
        None => cfg.adversary.clone(),
        Some(AttackKind::Replay) => {
            AdversaryModel::Replay { target: a.target, delay_s: a.delay, rewrite_timestamp: a.rewrite }
        }
        Some(AttackKind::Tamper) => AdversaryModel::Tamper { target: a.target, bit: a.bit },
        Some(AttackKind::Masquerade) => AdversaryModel::Masquerade {
            forgery: match a.forgery {
                ForgeryArg::RandomCid => Forgery::RandomCid,
                ForgeryArg::RandomCredential => Forgery::RandomCredential,
            },
            attempts: a.attempts,
        },
        Some(AttackKind::CompromisedMobile) => AdversaryModel::CompromisedMobile { mobile: a.mobile },
    };
    cfg.adversary = model;
    let r = simulator::run_scenario(&cfg).map_err(usage)?;
    for s in r.sessions.iter().filter(|s| s.touched || s.origin == Origin::Adversary) {
        out.say(session_line(s));
    }
    if let Some(c) = &r.closure {
        let e = &c.exposure;
        let i = &c.inversion;
        out.say(format!(
            "closure of mobile {}: {} keys, {} identities, {} digests after {} rounds",
            c.mobile, c.knowledge.keys, c.knowledge.identities, c.knowledge.digests, c.knowledge.rounds
        ));
        out.say(format!(
            "  exposed over {} sessions: {} session keys, {} expert ids, {} nonces",
            e.sessions, e.session_keys, e.expert_ids, e.nonces
        ));
        out.say(format!(
            "  with K_GW-SNj added, over {} sessions: {} session keys, {} expert ids, {} nonces",
            i.sessions, i.session_keys, i.expert_ids, i.nonces
        ));
    }
    summary_line(out, &r);
    out.report(&r);
    let accepted = r.adversary_acceptances();
    if accepted > 0 {
        return Err(Failure::Assertion(format!("{accepted} adversary-touched sessions were accepted")));
    }
    if let Some(c) = &r.closure {
        if !c.exposure.is_clean() {
            return Err(Failure::Assertion("the compromised mobile learned session secrets".into()));
        }
        if !c.inversion.is_total() {
            return Err(Failure::Assertion("inversion check did not recover the session secrets".into()));
        }
    }
    out.say("verdict: Rejected");
    Ok(())
}

fn costs(mut cfg: ScenarioConfig, out: &mut Out) -> Outcome {
    cfg.network = simulator::NetworkConfig::default();
    cfg.instrument = true;
    let r = simulator::run_honest(&cfg).map_err(usage)?;
    let s = r
        .established()
        .next()
        .ok_or_else(|| Failure::Assertion("the handshake did not complete".into()))?;
    let (ops, hops) = (s.ops.clone().unwrap_or_default(), s.hops.clone().unwrap_or_default());
    out.text.push_str(&render_cost_tables(&ops, &hops));
    out.record(json!({"record": "ops", "per_role": ops.per_role, "total": ops.total()}));
    out.record(json!({"record": "hops", "hops": hops.hops, "total": hops.total_bits()}));
    let mut problems = Vec::new();
    for d in mapping_discrepancies(&s.trace).map_err(|e| Failure::Assertion(e.to_string()))? {
        problems.push(format!(
            "{:?}: documented {} ({}), measured {}",
            d.line.step, d.line.ops, d.line.formulas, d.measured
        ));
    }
    if ops != reference_computation_cost() {
        problems.push("per-role op counts differ from the reference".into());
    }
    let expected: Vec<usize> = REFERENCE_HOP_BITS.iter().map(|(_, b)| *b).collect();
    if hops.bits() != expected {
        problems.push(format!("hop bits {:?}, expected {expected:?}", hops.bits()));
    }
    for p in &problems {
        out.say(format!("mismatch: {p}"));
        out.record(json!({"record": "mismatch", "detail": p}));
    }
    if problems.is_empty() {
        out.say("matches reference costs");
        Ok(())
    } else {
        Err(Failure::Assertion(format!("{} cost mismatches", problems.len())))
    }
}

fn ban_verify(b: &BanArgs, out: &mut Out) -> Outcome {
    let theory: Theory = match &b.theory {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            ban::parse_theory(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => ban::load_case_study(),
    };
    for label in &b.drop {
        if theory.assumption(label).is_none() {
            return Err(usage(format!("no assumption labelled {label}")));
        }
    }
    let dropped: Vec<&str> = b.drop.iter().map(String::as_str).collect();
    let theory = theory.without(&dropped);
    let (report, d) = BanReport::of(&theory);
    for (g, (_, formula)) in report.goals.iter().zip(&theory.goals) {
        let len = d.proof(formula).map_or(0, |p| p.len());
        let verdict = if g.derived { format!("derived ({len} steps)") } else { "not derived".into() };
        out.say(format!("{}: {}  {verdict}", g.label, g.formula));
        out.record(json!({"record": "goal", "label": g.label, "formula": g.formula, "derived": g.derived, "trace_len": len}));
        if b.trace && g.derived {
            for line in d.render_proof(formula).unwrap_or_default().lines() {
                out.say(format!("    {line}"));
            }
        }
    }
    out.say(format!("{:?} after {} steps, {} facts", report.status, report.steps, report.facts));
    out.record(json!({"record": "ban", "status": report.status, "steps": report.steps, "facts": report.facts, "dropped": b.drop}));
    if report.all_derived() {
        Ok(())
    } else {
        let missing: Vec<&str> = report.goals.iter().filter(|g| !g.derived).map(|g| g.label.as_str()).collect();
        Err(Failure::Assertion(format!("goals not derived: {}", missing.join(", "))))
    }
}

fn measure(mut cfg: ScenarioConfig, m: &MeasureArgs, out: &mut Out) -> Outcome {
    if m.max_sensors == 0 {
        return Err(usage("--max-sensors must be at least 1"));
    }
    if let Some(n) = m.repetitions {
        cfg.traffic.repetitions = n;
    }
    out.say(format!("{:>4} {:>4} {:>4} {:>16} {:>12}", "ME", "P", "SN", "throughput B/s", "EED ms"));
    let mut prev: Option<(f64, f64)> = None;
    let mut regressions = 0;
    for sn in 1..=m.max_sensors {
        let point = ScenarioConfig { network: simulator::NetworkConfig { experts: m.experts, patients: m.patients, sensors_per_patient: sn }, ..cfg.clone() };
        let r = simulator::measure(&point).map_err(usage)?;
        let (tp, eed) = (r.mean.throughput_bytes_per_s, r.mean.eed_s);
        out.say(format!("{:>4} {:>4} {:>4} {:>16.1} {:>12.3}", m.experts, m.patients, sn, tp, eed * 1e3));
        out.record(json!({
            "record": "measurement", "experts": m.experts, "patients": m.patients, "sensors_per_patient": sn,
            "sources": r.sources, "runs": r.runs.len(), "throughput_bytes_per_s": tp, "eed_s": eed,
        }));
        if let Some((ptp, peed)) = prev {
            if tp < ptp || eed < peed {
                regressions += 1;
            }
        }
        prev = Some((tp, eed));
    }
    if regressions > 0 {
        return Err(Failure::Assertion(format!("{regressions} points broke the non-decreasing trend")));
    }
    Ok(())
}

fn run(cli: &Cli, out: &mut Out) -> Outcome {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Register(n) => {
            apply_network(&mut cfg, n);
            register(cfg, out)
        }
        Command::Handshake(n) => {
            apply_network(&mut cfg, n);
            handshake(cfg, out)
        }
        Command::Attack(a) => attack(cfg, a, out),
        Command::Costs => costs(cfg, out),
        Command::BanVerify(b) => ban_verify(b, out),
        Command::Measure(m) => measure(cfg, m, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Out::default();
    let result = run(&cli, &mut out);
    print!("{}", out.text);
    let written = match &cli.output {
        Some(p) if p.as_os_str() == "-" => std::io::stdout().write_all(out.records.as_bytes()),
        Some(p) => std::fs::write(p, &out.records),
        None => Ok(()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write records: {e}");
        return ExitCode::from(2);
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
