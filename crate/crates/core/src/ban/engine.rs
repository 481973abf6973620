use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::Serialize;

use super::formula::Formula;
use super::rules::{apply_rule, Rule, RuleError};
use super::Theory;

pub const DEFAULT_STEP_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Assumption,
    Message(String),
    Rule { rule: Rule, premises: Vec<usize>, context: Option<Formula> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fact {
    pub label: String,
    pub formula: Formula,
    pub source: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// No rule produces anything new.
    Saturated,
    /// The step limit was hit first.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoalResult {
    pub label: String,
    pub formula: String,
    pub derived: bool,
    /// Label of the fact that discharges the goal.
    pub by: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Derivation {
    facts: IndexMap<Formula, Fact>,
    pub status: Status,
    /// Rule applications that produced a new fact.
    pub steps: usize,
}

/// One rendered line of a proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep<'a> {
    pub index: usize,
    pub fact: &'a Fact,
}

impl Derivation {
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn holds(&self, f: &Formula) -> bool {
        self.facts.contains_key(f)
    }

    pub fn fact(&self, f: &Formula) -> Option<&Fact> {
        self.facts.get(f)
    }

    pub fn goals(&self, theory: &Theory) -> Vec<GoalResult> {
        theory
            .goals
            .iter()
            .map(|(label, g)| GoalResult {
                label: label.clone(),
                formula: g.to_string(),
                derived: self.holds(g),
                by: self.fact(g).map(|f| f.label.clone()),
            })
            .collect()
    }

    pub fn all_goals_hold(&self, theory: &Theory) -> bool {
        theory.goals.iter().all(|(_, g)| self.holds(g))
    }

    /// Every fact the derivation of `f` depends on, in derivation order,
    /// ending with `f` itself.
    pub fn proof(&self, f: &Formula) -> Option<Vec<TraceStep<'_>>> {
        let root = self.facts.get_index_of(f)?;
        let mut needed = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if needed.insert(i) {
                if let Source::Rule { premises, .. } = &self.facts[i].source {
                    stack.extend(premises);
                }
            }
        }
        Some(needed.into_iter().map(|index| TraceStep { index, fact: &self.facts[index] }).collect())
    }

    /// Human-readable proof, one fact per line.
    pub fn render_proof(&self, f: &Formula) -> Option<String> {
        let steps = self.proof(f)?;
        let mut out = String::new();
        for s in steps {
            out.push_str(&format!("{}: {}", s.fact.label, s.fact.formula));
            match &s.fact.source {
                Source::Assumption => {}
                Source::Message(m) => out.push_str(&format!("    From {m}")),
                Source::Rule { rule, premises, .. } => {
                    let names: Vec<&str> = premises.iter().map(|&p| self.facts[p].label.as_str()).collect();
                    out.push_str(&format!("    From {} using {rule}", names.join(" and ")));
                }
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Re-runs the recorded rule for every derived fact.
    pub fn check(&self, theory: &Theory) -> Result<(), RuleError> {
        for fact in self.facts.values() {
            if let Source::Rule { rule, premises, context } = &fact.source {
                let inputs: Vec<Formula> = premises.iter().map(|&p| self.facts[p].formula.clone()).collect();
                let out = apply_rule(*rule, &inputs, context.as_ref(), theory)?;
                if out != fact.formula {
                    return Err(RuleError::NotApplicable { rule: *rule, why: "recorded conclusion differs" });
                }
            }
        }
        Ok(())
    }
}

struct Engine<'t> {
    theory: &'t Theory,
    facts: IndexMap<Formula, Fact>,
    universe: Vec<Formula>,
    next_label: usize,
    steps: usize,
    limit: usize,
}

impl Engine<'_> {
    fn fresh_label(&mut self) -> String {
        self.next_label += 1;
        format!("V{}", self.next_label)
    }

    /// Returns false once the step limit is reached.
    fn add(&mut self, rule: Rule, premises: Vec<usize>, context: Option<Formula>) -> bool {
        let inputs: Vec<Formula> = premises.iter().map(|&p| self.facts[p].formula.clone()).collect();
        let Ok(formula) = apply_rule(rule, &inputs, context.as_ref(), self.theory) else { return true };
        if self.facts.contains_key(&formula) {
            return true;
        }
        if self.steps == self.limit {
            return false;
        }
        self.steps += 1;
        let label = self.fresh_label();
        self.facts.insert(formula.clone(), Fact { label, formula, source: Source::Rule { rule, premises, context } });
        true
    }

    fn components(&self, i: usize) -> Vec<Formula> {
        match &self.facts[i].formula {
            Formula::Sees(_, t) => match t.as_ref() {
                Formula::Tuple(items) => items.clone(),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// Semi-naive saturation: each round only considers premise
    /// combinations that involve at least one fact from the previous round.
    fn run(&mut self) -> Status {
        let mut done = 0;
        loop {
            let end = self.facts.len();
            if done == end {
                return Status::Saturated;
            }
            for i in done..end {
                for rule in [Rule::R3, Rule::D2] {
                    let contexts =
                        if rule == Rule::R3 { self.universe.clone() } else { self.components(i) };
                    for c in contexts {
                        if !self.add(rule, vec![i], Some(c)) {
                            return Status::Inconclusive;
                        }
                    }
                }
            }
            for rule in Rule::ALL.into_iter().filter(|r| r.arity() == 2) {
                for a in 0..end {
                    for b in 0..end {
                        if a.max(b) < done || a == b {
                            continue;
                        }
                        if !self.add(rule, vec![a, b], None) {
                            return Status::Inconclusive;
                        }
                    }
                }
            }
            done = end;
        }
    }
}

/// Tuples any rule may reason about: every tuple or encrypted body that
/// occurs in the theory.
fn universe(theory: &Theory) -> Vec<Formula> {
    let mut set = BTreeSet::new();
    let mut collect = |f: &Formula| match f {
        Formula::Tuple(_) => {
            set.insert(f.clone());
        }
        Formula::Encrypted(items, _) => {
            set.insert(Formula::Tuple(items.clone()));
        }
        _ => {}
    };
    for m in &theory.messages {
        m.body.visit(&mut collect);
    }
    for (_, f) in theory.assumptions.iter().chain(&theory.goals) {
        f.visit(&mut collect);
    }
    set.into_iter().collect()
}

pub fn derive(theory: &Theory) -> Derivation {
    derive_with_limit(theory, DEFAULT_STEP_LIMIT)
}

pub fn derive_with_limit(theory: &Theory, limit: usize) -> Derivation {
    let mut engine = Engine {
        theory,
        facts: IndexMap::new(),
        universe: universe(theory),
        next_label: 0,
        steps: 0,
        limit,
    };
    for (label, f) in &theory.assumptions {
        engine.facts.entry(f.clone()).or_insert_with(|| Fact {
            label: label.clone(),
            formula: f.clone(),
            source: Source::Assumption,
        });
    }
    for m in &theory.messages {
        let seen = Formula::sees(&m.to, m.body.clone());
        if !engine.facts.contains_key(&seen) {
            let label = engine.fresh_label();
            engine
                .facts
                .insert(seen.clone(), Fact { label, formula: seen, source: Source::Message(m.label.clone()) });
        }
    }
    let status = engine.run();
    Derivation { facts: engine.facts, status, steps: engine.steps }
}
