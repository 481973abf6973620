use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::formula::Formula;
use super::Theory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    /// Message meaning: `R |≡ R<-K->S`, `R ◁ {Y}_K` gives `R |≡ S |~ Y`.
    R1,
    /// Nonce verification: `R |≡ #(Y)`, `R |≡ S |~ Y` gives `R |≡ S |≡ Y`.
    R2,
    /// Freshness conjunction: `R |≡ #(Y)` gives `R |≡ #(Y, Z)`.
    R3,
    /// Jurisdiction: `R |≡ S => Y`, `R |≡ S |≡ Y` gives `R |≡ Y`.
    R4,
    /// Decryption: `R ◁ {Y}_K` and a belief in `K` gives `R ◁ Y`.
    D1,
    /// Projection: `R ◁ (Y, Z)` gives `R ◁ Y`.
    D2,
    /// A peer's belief in a message sent under a derived key becomes a belief
    /// in that key.
    B1,
    /// A principal that trusts the delivery of every other input of a derived
    /// key, bound to its own identity, credits the other party with the key.
    B2,
}

impl Rule {
    pub const ALL: [Rule; 8] = [Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::D1, Rule::D2, Rule::B1, Rule::B2];

    pub fn arity(self) -> usize {
        match self {
            Rule::R3 | Rule::D2 => 1,
            _ => 2,
        }
    }

    /// Rules whose single premise is combined with an extra term (a tuple for
    /// R3, a component for D2).
    pub fn takes_context(self) -> bool {
        matches!(self, Rule::R3 | Rule::D2)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("{rule} is not applicable: {why}")]
    NotApplicable { rule: Rule, why: &'static str },
}

fn believes(f: &Formula) -> Option<(&str, &Formula)> {
    match f {
        Formula::Believes(p, g) => Some((p, g)),
        _ => None,
    }
}

/// The other end of a key that `r` shares, if `r` is one of its ends.
fn partner<'a>(r: &str, key: &'a Formula) -> Option<(&'a str, &'a str)> {
    match key {
        Formula::SharedKey(a, b, k) if a == r && b != r => Some((b, k)),
        Formula::SharedKey(a, b, k) if b == r && a != r => Some((a, k)),
        _ => None,
    }
}

fn holds_key(r: &str, key: &Formula) -> Option<String> {
    match key {
        Formula::SharedKey(a, b, k) if a == r || b == r => Some(k.clone()),
        _ => None,
    }
}

/// Applies one rule to concrete premises. `context` is the tuple (R3) or
/// component (D2) the conclusion is about; other rules ignore it.
pub fn apply_rule(
    rule: Rule,
    premises: &[Formula],
    context: Option<&Formula>,
    theory: &Theory,
) -> Result<Formula, RuleError> {
    let na = |why| RuleError::NotApplicable { rule, why };
    if premises.len() != rule.arity() {
        return Err(na("wrong number of premises"));
    }
    match rule {
        Rule::R1 => {
            let (r, key) = believes(&premises[0]).ok_or(na("first premise is not a belief"))?;
            let (s, k) = partner(r, key).ok_or(na("no shared key with the believer"))?;
            match &premises[1] {
                Formula::Sees(r2, enc) if r2 == r => match enc.as_ref() {
                    Formula::Encrypted(y, k2) if k2 == k => {
                        Ok(Formula::believes(r, Formula::said(s, Formula::Tuple(y.clone()))))
                    }
                    _ => Err(na("seen term is not encrypted under the key")),
                },
                _ => Err(na("second premise is not seen by the believer")),
            }
        }
        Rule::R2 => {
            let (r, fresh) = believes(&premises[0]).ok_or(na("first premise is not a belief"))?;
            let Formula::Fresh(y) = fresh else { return Err(na("first premise is not freshness")) };
            let (r2, said) = believes(&premises[1]).ok_or(na("second premise is not a belief"))?;
            match said {
                Formula::Said(s, y2) if r2 == r && y2 == y => {
                    Ok(Formula::believes(r, Formula::believes(s, y.as_ref().clone())))
                }
                _ => Err(na("second premise is not a matching utterance")),
            }
        }
        Rule::R3 => {
            let (r, fresh) = believes(&premises[0]).ok_or(na("premise is not a belief"))?;
            let Formula::Fresh(y) = fresh else { return Err(na("premise is not freshness")) };
            match context {
                Some(t @ Formula::Tuple(items)) if items.contains(y) => {
                    Ok(Formula::believes(r, Formula::fresh(t.clone())))
                }
                _ => Err(na("context is not a tuple containing the fresh term")),
            }
        }
        Rule::R4 => {
            let (r, ctl) = believes(&premises[0]).ok_or(na("first premise is not a belief"))?;
            let Formula::Controls(s, y) = ctl else { return Err(na("first premise is not jurisdiction")) };
            let (r2, inner) = believes(&premises[1]).ok_or(na("second premise is not a belief"))?;
            match inner {
                Formula::Believes(s2, y2) if r2 == r && s2 == s && y2 == y => {
                    Ok(Formula::believes(r, y.as_ref().clone()))
                }
                _ => Err(na("second premise is not the controller's belief")),
            }
        }
        Rule::D1 => {
            let Formula::Sees(r, enc) = &premises[0] else { return Err(na("first premise is not seeing")) };
            let Formula::Encrypted(y, k) = enc.as_ref() else { return Err(na("seen term is not encrypted")) };
            let (r2, key) = believes(&premises[1]).ok_or(na("second premise is not a belief"))?;
            if r2 != r || holds_key(r, key).as_deref() != Some(k.as_str()) {
                return Err(na("seer does not hold the key"));
            }
            Ok(Formula::sees(r, Formula::Tuple(y.clone())))
        }
        Rule::D2 => {
            let Formula::Sees(r, t) = &premises[0] else { return Err(na("premise is not seeing")) };
            let Formula::Tuple(items) = t.as_ref() else { return Err(na("seen term is not a tuple")) };
            match context {
                Some(c) if items.contains(c) => Ok(Formula::sees(r, c.clone())),
                _ => Err(na("context is not a component")),
            }
        }
        Rule::B1 => {
            let Formula::Sees(r, enc) = &premises[0] else { return Err(na("first premise is not seeing")) };
            let Formula::Encrypted(y, k) = enc.as_ref() else { return Err(na("seen term is not encrypted")) };
            let (r2, inner) = believes(&premises[1]).ok_or(na("second premise is not a belief"))?;
            let Formula::Believes(s, t) = inner else { return Err(na("second premise is not a nested belief")) };
            if r2 != r || t.as_ref() != &Formula::Tuple(y.clone()) {
                return Err(na("belief is about a different message"));
            }
            let d = theory.derived_key(k).ok_or(na("key is not derived"))?;
            if !(d.has_party(r) && d.has_party(s) && r != s) {
                return Err(na("key does not join these principals"));
            }
            Ok(Formula::believes(r, Formula::believes(s, d.as_formula())))
        }
        Rule::B2 => {
            let (r, a) = believes(&premises[0]).ok_or(na("first premise is not a belief"))?;
            let (r2, b) = believes(&premises[1]).ok_or(na("second premise is not a belief"))?;
            let (Formula::Believes(_, ya), Formula::Believes(_, yb)) = (a, b) else {
                return Err(na("premises are not nested beliefs"));
            };
            let (Formula::Tuple(ya_items), Formula::Tuple(yb_items)) = (ya.as_ref(), yb.as_ref()) else {
                return Err(na("believed terms are not tuples"));
            };
            if r2 != r {
                return Err(na("premises belong to different principals"));
            }
            for d in &theory.derived_keys {
                let Some((own, other)) = d.split(r) else { continue };
                let covers = d.inputs.iter().filter(|i| *i != own).all(|i| ya_items.contains(&Formula::atom(i)));
                let binds = yb_items.contains(&Formula::atom(own))
                    && yb_items.iter().any(|f| matches!(f, Formula::Encrypted(items, _) if items == ya_items));
                if covers && binds {
                    return Ok(Formula::believes(r, Formula::believes(other, d.as_formula())));
                }
            }
            Err(na("premises do not cover a derived key"))
        }
    }
}
