//! BAN-logic checker for the handshake's authentication goals.
//!
//! A [`Theory`] holds assumptions, idealised messages, goals and derived-key
//! declarations. [`derive`] saturates it under the rules in [`Rule`] and
//! records where every fact came from.

mod engine;
mod formula;
mod rules;
mod syntax;

use serde::Serialize;

pub use engine::{derive, derive_with_limit, Derivation, Fact, GoalResult, Source, Status, TraceStep, DEFAULT_STEP_LIMIT};
pub use formula::Formula;
pub use rules::{apply_rule, Rule, RuleError};
pub use syntax::{parse_formula, parse_theory, render_theory, ParseError};

pub const CASE_STUDY: &str = include_str!("case_study.ban");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub label: String,
    pub from: String,
    pub to: String,
    pub body: Formula,
}

/// `key` is a hash of `inputs`; each party is named with the identity atom
/// that appears among the inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivedKey {
    pub key: String,
    pub inputs: Vec<String>,
    pub parties: [(String, String); 2],
}

impl DerivedKey {
    pub fn has_party(&self, p: &str) -> bool {
        self.parties.iter().any(|(q, _)| q == p)
    }

    /// `(own identity atom, other principal)` for party `p`.
    pub fn split(&self, p: &str) -> Option<(&str, &str)> {
        let [(a, ai), (b, bi)] = &self.parties;
        if a == p {
            Some((ai, b))
        } else if b == p {
            Some((bi, a))
        } else {
            None
        }
    }

    pub fn as_formula(&self) -> Formula {
        Formula::key(&self.parties[0].0, &self.parties[1].0, &self.key)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Theory {
    pub assumptions: Vec<(String, Formula)>,
    pub messages: Vec<Message>,
    pub goals: Vec<(String, Formula)>,
    pub derived_keys: Vec<DerivedKey>,
}

impl Theory {
    pub fn derived_key(&self, key: &str) -> Option<&DerivedKey> {
        self.derived_keys.iter().find(|d| d.key == key)
    }

    pub fn assumption(&self, label: &str) -> Option<&Formula> {
        self.assumptions.iter().find(|(l, _)| l == label).map(|(_, f)| f)
    }

    /// The same theory with the named assumptions removed.
    pub fn without(&self, labels: &[&str]) -> Theory {
        let mut t = self.clone();
        t.assumptions.retain(|(l, _)| !labels.contains(&l.as_str()));
        t
    }

    pub fn without_assumptions(&self) -> Theory {
        Theory { assumptions: Vec::new(), ..self.clone() }
    }
}

/// The handshake's idealised messages, assumptions and goals.
pub fn load_case_study() -> Theory {
    parse_theory(CASE_STUDY).expect("embedded theory parses")
}

/// Outcome of checking a theory, plus the two single-assumption ablations
/// that remove a jurisdiction premise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BanReport {
    pub status: Status,
    pub steps: usize,
    pub facts: usize,
    pub goals: Vec<GoalResult>,
}

impl BanReport {
    pub fn of(theory: &Theory) -> (BanReport, Derivation) {
        let d = derive(theory);
        let r = BanReport { status: d.status, steps: d.steps, facts: d.len(), goals: d.goals(theory) };
        (r, d)
    }

    pub fn all_derived(&self) -> bool {
        self.goals.iter().all(|g| g.derived)
    }
}
