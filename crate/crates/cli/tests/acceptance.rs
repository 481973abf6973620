//! Acceptance gate: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the lines always print; exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wban_auth::ban::{derive, load_case_study, Status, DEFAULT_STEP_LIMIT};
use wban_auth::metrics::{mapping_discrepancies, OpTally};
use wban_auth::simulator::{
    self, ciphertext_bits, expected_replay_reason, Forgery, Origin, ScenarioReport, SessionOutcome,
};
use wban_auth::{MessageKind, Role, ScenarioConfig};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn net(e: u32, p: u32, s: u32, seed: u64) -> ScenarioConfig {
    ScenarioConfig { seed, ..ScenarioConfig::with_network(e, p, s) }
}

/// The three network families: one patient, three patients, and the full
/// three-expert setting.
fn settings() -> Vec<(u32, u32, u32)> {
    let mut v: Vec<_> = (1..=10).map(|s| (1, 1, s)).collect();
    v.extend((1..=10).map(|s| (1, 3, s)));
    v.push((3, 3, 10));
    v
}

fn no_acceptance(r: &ScenarioReport, what: &str) -> Result<(), String> {
    check(r.adversary_acceptances() == 0, || format!("{what}: {} adversary acceptances", r.adversary_acceptances()))
}

fn honest_handshakes() -> Verdict {
    let start = Instant::now();
    let mut sessions = 0;
    let all = settings();
    for run in 0..100u64 {
        let (e, p, s) = all[run as usize % all.len()];
        let r = simulator::run_honest(&net(e, p, s, run)).map_err(|x| x.to_string())?;
        check(r.sessions.len() == (e * p * s) as usize, || format!("run {run}: {} sessions", r.sessions.len()))?;
        for x in &r.sessions {
            check(x.outcome == SessionOutcome::KeyEstablished, || format!("run {run}: {:?}", x.outcome))?;
            check(x.key.is_some() && x.key == x.sensor_key, || format!("run {run} session {}: keys differ", x.session))?;
        }
        sessions += r.sessions.len();
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(5), || format!("took {took:?}"))?;
    Ok(format!("100 runs, {sessions} sessions, identical keys on both ends, {took:.2?}"))
}

const PUBLISHED_BITS: [usize; 4] = [672, 288, 288, 160];

fn communication_cost() -> Verdict {
    let mut checked = 0;
    for seed in 0..20 {
        let r = simulator::run_honest(&net(2, 2, 2, seed)).map_err(|x| x.to_string())?;
        for s in &r.sessions {
            let h = s.hops.as_ref().ok_or("no hop ledger")?;
            check(h.bits() == PUBLISHED_BITS, || format!("seed {seed}: {:?}", h.bits()))?;
            check(h.total_bits() == 1408, || format!("total {}", h.total_bits()))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} handshakes at 672/288/288/160, total 1408"))
}

fn computation_cost() -> Verdict {
    // (T_H, T_ENC, T_XOR)
    let published = [
        (Role::Expert, OpTally::new(4, 2, 5)),
        (Role::Gateway, OpTally::new(1, 4, 0)),
        (Role::Mobile, OpTally::new(0, 2, 0)),
        (Role::Sensor, OpTally::new(1, 3, 2)),
    ];
    let r = simulator::run_honest(&net(1, 1, 1, 0)).map_err(|x| x.to_string())?;
    let s = &r.sessions[0];
    let ops = s.ops.as_ref().ok_or("no op counts")?;
    let mut problems = Vec::new();
    for d in mapping_discrepancies(&s.trace).map_err(|x| x.to_string())? {
        problems.push(format!("{:?} ({}): documented {}, measured {}", d.line.step, d.line.formulas, d.line.ops, d.measured));
    }
    for (role, want) in published {
        if ops.get(role) != want {
            problems.push(format!("{role}: {} vs published {want}", ops.get(role)));
        }
    }
    if ops.total() != OpTally::new(6, 11, 7) {
        problems.push(format!("total {}", ops.total()));
    }
    if problems.is_empty() {
        Ok(format!("per role and total {} exact", ops.total()))
    } else {
        Err(problems.join("; "))
    }
}

fn replay() -> Verdict {
    let receivers = [Role::Gateway, Role::Mobile, Role::Sensor, Role::Expert];
    let mut runs = 0;
    for (kind, by) in MessageKind::ALL.into_iter().zip(receivers) {
        for rewrite in [false, true] {
            for seed in 0..50 {
                let r = simulator::run_replay_attack(&net(1, 1, 1, seed), kind, 10, rewrite).map_err(|x| x.to_string())?;
                no_acceptance(&r, &format!("{kind} rewrite={rewrite} seed={seed}"))?;
                let want = SessionOutcome::Rejected { by, reason: expected_replay_reason(rewrite) };
                check(r.sessions[0].outcome == want, || format!("{kind} rewrite={rewrite}: {:?}", r.sessions[0].outcome))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} replays, 0 acceptances"))
}

fn tamper() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a3e);
    let mut runs = 0;
    for kind in MessageKind::ALL {
        let range = ciphertext_bits(kind);
        for i in 0..100u64 {
            let bit = rng.gen_range(range.clone());
            let r = simulator::run_tamper_attack(&net(1, 1, 1, i), kind, bit).map_err(|x| x.to_string())?;
            no_acceptance(&r, &format!("{kind} bit {bit}"))?;
            check(matches!(r.sessions[0].outcome, SessionOutcome::Rejected { .. }), || format!("{kind} bit {bit}: not rejected"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} single-bit ciphertext flips, 0 acceptances"))
}

fn masquerade() -> Verdict {
    let mut detail = Vec::new();
    for forgery in [Forgery::RandomCid, Forgery::RandomCredential] {
        let r = simulator::run_masquerade_attack(&net(1, 1, 1, 42), forgery, 50).map_err(|x| x.to_string())?;
        let forged: Vec<_> = r.sessions.iter().filter(|s| s.origin == Origin::Adversary).collect();
        check(forged.len() == 50, || format!("{forgery:?}: {} forgeries", forged.len()))?;
        check(forged.iter().all(|s| matches!(s.outcome, SessionOutcome::Rejected { .. })), || format!("{forgery:?}: a forgery was not rejected"))?;
        no_acceptance(&r, &format!("{forgery:?}"))?;
        detail.push(format!("{forgery:?} 50/50 rejected"));
    }
    Ok(detail.join(", "))
}

fn compromised_mobile() -> Verdict {
    for seed in 0..100 {
        let r = simulator::run_compromised_mobile(&net(2, 2, 2, seed), (seed % 2) as usize).map_err(|x| x.to_string())?;
        let c = r.closure.as_ref().ok_or("no closure report")?;
        check(c.exposure.is_clean(), || format!("seed {seed}: exposure {:?}", c.exposure))?;
        check(c.inversion.is_total(), || format!("seed {seed}: inversion {:?}", c.inversion))?;
        no_acceptance(&r, &format!("seed {seed}"))?;
    }
    Ok("100 runs: closure holds no K_ssk, M_id or M; adding K_GW-SNj recovers all".into())
}

fn key_uniqueness() -> Verdict {
    let r = simulator::run_honest(&net(10, 10, 10, 1)).map_err(|x| x.to_string())?;
    let keys: BTreeSet<_> = r.established().filter_map(|s| s.key).collect();
    check(r.sessions.len() == 1000 && r.established().count() == 1000, || "not every session keyed".into())?;
    check(keys.len() == 1000, || format!("{} distinct keys", keys.len()))?;
    Ok("1000 sessions, 1000 distinct keys".into())
}

fn ban() -> Verdict {
    let start = Instant::now();
    let t = load_case_study();
    check(t.assumptions.len() == 20 && t.messages.len() == 4 && t.goals.len() == 4, || "theory shape".into())?;
    let d = derive(&t);
    check(d.status == Status::Saturated && d.steps <= DEFAULT_STEP_LIMIT, || format!("{:?} after {}", d.status, d.steps))?;
    check(d.all_goals_hold(&t), || "not every goal derived".into())?;
    d.check(&t).map_err(|e| e.to_string())?;
    for (drop, lost) in [("P18", "G3"), ("P19", "G4")] {
        let a = derive(&t.without(&[drop]));
        for (label, g) in &t.goals {
            check(a.holds(g) == (label != lost), || format!("without {drop}: {label} wrong"))?;
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("G1-G4 in {} steps; P18 blocks only G3, P19 only G4; {took:.2?}", d.steps))
}

fn trends() -> Verdict {
    let mut out = Vec::new();
    for patients in [1, 3] {
        let mut prev: Option<(f64, f64)> = None;
        for sn in 1..=10 {
            let m = simulator::measure(&net(1, patients, sn, 0)).map_err(|x| x.to_string())?;
            let cur = (m.mean.throughput_bytes_per_s, m.mean.eed_s);
            if let Some(p) = prev {
                check(cur.0 >= p.0 && cur.1 >= p.1, || format!("P={patients} SN={sn}: {cur:?} after {p:?}"))?;
            }
            prev = Some(cur);
        }
        out.push(format!("P={patients} non-decreasing"));
    }
    Ok(format!("ME=1 SN=1..10: {}", out.join(", ")))
}

fn cli_determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("wban-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cases: [&[&str]; 9] = [
        &["register", "--patients", "2", "--sensors", "2"],
        &["handshake", "--experts", "2", "--sensors", "3"],
        &["attack", "--kind", "replay", "--target", "gateway-to-mobile"],
        &["attack", "--kind", "tamper", "--target", "sensor-to-expert", "--bit", "7"],
        &["attack", "--kind", "masquerade", "--forgery", "random-credential"],
        &["attack", "--kind", "compromised-mobile", "--patients", "2", "--sensors", "2"],
        &["costs"],
        &["ban-verify"],
        &["measure", "--max-sensors", "3"],
    ];
    let run = |args: &[&str], name: &str| -> Result<Vec<u8>, String> {
        let path = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_wban"))
            .args(args)
            .args(["--seed", "5", "--output"])
            .arg(&path)
            .env_remove("WBAN_CONFIG")
            .output()
            .map_err(|e| e.to_string())?
            .status;
        check(status.success(), || format!("{args:?} exited with {status}"))?;
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let mut result = Ok(format!("{} subcommand invocations byte-identical across two runs", cases.len()));
    for (i, args) in cases.iter().enumerate() {
        let a = run(args, &format!("{i}a"));
        let b = run(args, &format!("{i}b"));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b && !a.is_empty() => {}
            (Ok(_), Ok(_)) => result = Err(format!("{args:?} output differs")),
            (Err(e), _) | (_, Err(e)) => result = Err(e),
        }
        if result.is_err() {
            break;
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("honest handshake", honest_handshakes),
        ("communication cost", communication_cost),
        ("computation cost", computation_cost),
        ("replay resistance", replay),
        ("tamper resistance", tamper),
        ("masquerade resistance", masquerade),
        ("compromised-mobile confinement", compromised_mobile),
        ("session-key uniqueness", key_uniqueness),
        ("BAN verification", ban),
        ("throughput and delay trends", trends),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
