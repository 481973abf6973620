//! Textual theory format.
//!
//! ```text
//! # comment
//! assume P1: believes(MD, key(MD, GW, K_l))
//! message M1: MD -> GW: enc(K_l, [hash(M_id), M, T_1])
//! goal G1: believes(MD, believes(SN_j, key(MD, SN_j, K_ssk)))
//! derive K_ssk from [M_id, SN_j, M] parties MD:M_id, SN_j:SN_j
//! ```
//!
//! Formulas:
//!
//! ```text
//! f := believes(P, f) | sees(P, f) | said(P, f) | controls(P, f)
//!    | fresh(f) | key(P, Q, K) | enc(K, [f, ...]) | [f, ...]
//!    | hash(NAME) | NAME
//! ```
//!
//! `hash(X)` is an opaque atom, unrelated to `X`. One directive per line.

use thiserror::Error;

use super::formula::Formula;
use super::{DerivedKey, Message, Theory};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

type R<T> = Result<T, String>;

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '*')
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Self { s, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.s.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> R<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(format!("expected `{token}` at `{}`", self.rest()))
        }
    }

    fn name(&mut self) -> R<String> {
        self.skip_ws();
        let len = self.rest().find(|c| !is_name_char(c)).unwrap_or(self.rest().len());
        if len == 0 {
            return Err(format!("expected a name at `{}`", self.rest()));
        }
        let n = self.rest()[..len].to_string();
        self.pos += len;
        Ok(n)
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let rest = self.rest();
        if rest.starts_with(kw) && !rest[kw.len()..].starts_with(is_name_char) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn done(&mut self) -> R<()> {
        self.skip_ws();
        if self.rest().is_empty() {
            Ok(())
        } else {
            Err(format!("unexpected trailing `{}`", self.rest()))
        }
    }

    fn list(&mut self) -> R<Vec<Formula>> {
        self.expect("[")?;
        let mut items = Vec::new();
        if self.eat("]") {
            return Ok(items);
        }
        loop {
            items.push(self.formula()?);
            if self.eat("]") {
                return Ok(items);
            }
            self.expect(",")?;
        }
    }

    fn names(&mut self) -> R<Vec<String>> {
        self.expect("[")?;
        let mut out = vec![self.name()?];
        while self.eat(",") {
            out.push(self.name()?);
        }
        self.expect("]")?;
        Ok(out)
    }

    fn formula(&mut self) -> R<Formula> {
        self.skip_ws();
        if self.rest().starts_with('[') {
            return Ok(Formula::Tuple(self.list()?));
        }
        let head = self.name()?;
        if !self.eat("(") {
            return Ok(Formula::Atom(head));
        }
        let f = match head.as_str() {
            "believes" | "sees" | "said" | "controls" => {
                let p = self.name()?;
                self.expect(",")?;
                let g = Box::new(self.formula()?);
                match head.as_str() {
                    "believes" => Formula::Believes(p, g),
                    "sees" => Formula::Sees(p, g),
                    "said" => Formula::Said(p, g),
                    _ => Formula::Controls(p, g),
                }
            }
            "fresh" => Formula::Fresh(Box::new(self.formula()?)),
            "key" => {
                let p = self.name()?;
                self.expect(",")?;
                let q = self.name()?;
                self.expect(",")?;
                Formula::SharedKey(p, q, self.name()?)
            }
            "enc" => {
                let k = self.name()?;
                self.expect(",")?;
                Formula::Encrypted(self.list()?, k)
            }
            "hash" => Formula::Atom(format!("H({})", self.name()?)),
            other => return Err(format!("unknown constructor `{other}`")),
        };
        self.expect(")")?;
        Ok(f)
    }
}

/// Parses one formula.
pub fn parse_formula(s: &str) -> Result<Formula, ParseError> {
    let mut c = Cursor::new(s);
    let f = c.formula().and_then(|f| c.done().map(|_| f));
    f.map_err(|msg| ParseError { line: 1, msg })
}

fn party(c: &mut Cursor<'_>) -> R<(String, String)> {
    let p = c.name()?;
    c.expect(":")?;
    Ok((p, c.name()?))
}

fn directive(c: &mut Cursor<'_>, theory: &mut Theory) -> R<()> {
    if c.keyword("assume") {
        let label = c.name()?;
        c.expect(":")?;
        theory.assumptions.push((label, c.formula()?));
    } else if c.keyword("goal") {
        let label = c.name()?;
        c.expect(":")?;
        theory.goals.push((label, c.formula()?));
    } else if c.keyword("message") {
        let label = c.name()?;
        c.expect(":")?;
        let from = c.name()?;
        c.expect("->")?;
        let to = c.name()?;
        c.expect(":")?;
        theory.messages.push(Message { label, from, to, body: c.formula()? });
    } else if c.keyword("derive") {
        let key = c.name()?;
        if !c.keyword("from") {
            return Err("expected `from`".into());
        }
        let inputs = c.names()?;
        if !c.keyword("parties") {
            return Err("expected `parties`".into());
        }
        let a = party(c)?;
        c.expect(",")?;
        let b = party(c)?;
        for (_, id) in [&a, &b] {
            if !inputs.contains(id) {
                return Err(format!("party identity `{id}` is not a key input"));
            }
        }
        theory.derived_keys.push(DerivedKey { key, inputs, parties: [a, b] });
    } else {
        return Err(format!("unknown directive at `{}`", c.rest()));
    }
    c.done()
}

pub fn parse_theory(text: &str) -> Result<Theory, ParseError> {
    let mut theory = Theory::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        directive(&mut Cursor::new(line), &mut theory).map_err(|msg| ParseError { line: i + 1, msg })?;
    }
    Ok(theory)
}

/// Renders a theory back into the textual format.
pub fn render_theory(theory: &Theory) -> String {
    let mut out = String::new();
    for d in &theory.derived_keys {
        let [(p, pi), (q, qi)] = &d.parties;
        out.push_str(&format!("derive {} from [{}] parties {p}:{pi}, {q}:{qi}\n", d.key, d.inputs.join(", ")));
    }
    for m in &theory.messages {
        out.push_str(&format!("message {}: {} -> {}: {}\n", m.label, m.from, m.to, m.body));
    }
    for (label, f) in &theory.assumptions {
        out.push_str(&format!("assume {label}: {f}\n"));
    }
    for (label, f) in &theory.goals {
        out.push_str(&format!("goal {label}: {f}\n"));
    }
    out
}
