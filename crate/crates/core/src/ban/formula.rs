use std::fmt;

/// A BAN-logic term. Principals, keys and atoms are plain symbols.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom(String),
    Believes(String, Box<Formula>),
    Sees(String, Box<Formula>),
    Said(String, Box<Formula>),
    Fresh(Box<Formula>),
    Controls(String, Box<Formula>),
    /// `p <-K-> q`. Ordered structurally; rules that consume a key belief
    /// accept either orientation.
    SharedKey(String, String, String),
    Encrypted(Vec<Formula>, String),
    Tuple(Vec<Formula>),
}

impl Formula {
    pub fn atom(s: &str) -> Self {
        Formula::Atom(s.to_string())
    }

    pub fn believes(p: &str, f: Formula) -> Self {
        Formula::Believes(p.to_string(), Box::new(f))
    }

    pub fn sees(p: &str, f: Formula) -> Self {
        Formula::Sees(p.to_string(), Box::new(f))
    }

    pub fn said(p: &str, f: Formula) -> Self {
        Formula::Said(p.to_string(), Box::new(f))
    }

    pub fn fresh(f: Formula) -> Self {
        Formula::Fresh(Box::new(f))
    }

    pub fn controls(p: &str, f: Formula) -> Self {
        Formula::Controls(p.to_string(), Box::new(f))
    }

    pub fn key(p: &str, q: &str, k: &str) -> Self {
        Formula::SharedKey(p.to_string(), q.to_string(), k.to_string())
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::SharedKey(..) => 1,
            Formula::Believes(_, f) | Formula::Sees(_, f) | Formula::Said(_, f) | Formula::Controls(_, f) => {
                1 + f.depth()
            }
            Formula::Fresh(f) => 1 + f.depth(),
            Formula::Encrypted(items, _) | Formula::Tuple(items) => {
                1 + items.iter().map(Formula::depth).max().unwrap_or(0)
            }
        }
    }

    /// Pre-order walk over this formula and every subterm.
    pub fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Atom(_) | Formula::SharedKey(..) => {}
            Formula::Believes(_, g) | Formula::Sees(_, g) | Formula::Said(_, g) | Formula::Controls(_, g) => g.visit(f),
            Formula::Fresh(g) => g.visit(f),
            Formula::Encrypted(items, _) | Formula::Tuple(items) => items.iter().for_each(|g| g.visit(f)),
        }
    }
}

fn list(f: &mut fmt::Formatter<'_>, items: &[Formula]) -> fmt::Result {
    f.write_str("[")?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    f.write_str("]")
}

/// Renders in the textual syntax accepted by the parser.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => match a.strip_prefix("H(").and_then(|s| s.strip_suffix(')')) {
                Some(inner) => write!(f, "hash({inner})"),
                None => f.write_str(a),
            },
            Formula::Believes(p, g) => write!(f, "believes({p}, {g})"),
            Formula::Sees(p, g) => write!(f, "sees({p}, {g})"),
            Formula::Said(p, g) => write!(f, "said({p}, {g})"),
            Formula::Fresh(g) => write!(f, "fresh({g})"),
            Formula::Controls(p, g) => write!(f, "controls({p}, {g})"),
            Formula::SharedKey(p, q, k) => write!(f, "key({p}, {q}, {k})"),
            Formula::Encrypted(items, k) => {
                write!(f, "enc({k}, ")?;
                list(f, items)?;
                f.write_str(")")
            }
            Formula::Tuple(items) => list(f, items),
        }
    }
}
