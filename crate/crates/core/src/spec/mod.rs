//! The task specification language: predicates over labeled states and
//! `achieve` / `ensuring` / `;` / `or` formulas over finite traces.

mod parse;
mod print;

use std::collections::BTreeSet;
use std::fmt;

pub use parse::{parse_predicate, parse_spec, SyntaxError};
pub use print::{print_predicate, print_spec};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("satisfaction is undefined on an empty trace")]
    EmptyTrace,
    #[error("invalid atom name `{0}`")]
    InvalidAtom(String),
}

/// Returns true if `name` matches `[A-Za-z_][A-Za-z0-9_]*` and is not a keyword.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !parse::is_keyword(name)
}

/// An atomic proposition, possibly negated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomLiteral {
    pub name: String,
    pub negated: bool,
}

impl AtomLiteral {
    pub fn new(name: impl Into<String>, negated: bool) -> Result<Self, SpecError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(SpecError::InvalidAtom(name));
        }
        Ok(Self { name, negated })
    }
}

/// Boolean combination of literals. Negation only appears on literals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Literal(AtomLiteral),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    /// Positive literal. Panics on an invalid identifier; use [`AtomLiteral::new`]
    /// for fallible construction.
    pub fn atom(name: &str) -> Self {
        Predicate::Literal(AtomLiteral::new(name, false).expect("valid identifier"))
    }

    pub fn not_atom(name: &str) -> Self {
        Predicate::Literal(AtomLiteral::new(name, true).expect("valid identifier"))
    }

    pub fn and(self, rhs: Predicate) -> Self {
        Predicate::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Predicate) -> Self {
        Predicate::Or(Box::new(self), Box::new(rhs))
    }

    pub fn eval(&self, labels: &LabelSet) -> bool {
        eval_pred(self, labels)
    }

    /// Names of all atoms mentioned, sorted.
    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Predicate::Literal(lit) => {
                out.insert(lit.name.as_str());
            }
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_predicate(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpecAst {
    Achieve(Predicate),
    Ensuring(Box<SpecAst>, Predicate),
    Seq(Box<SpecAst>, Box<SpecAst>),
    Or(Box<SpecAst>, Box<SpecAst>),
}

impl SpecAst {
    pub fn achieve(b: Predicate) -> Self {
        SpecAst::Achieve(b)
    }

    pub fn ensuring(self, b: Predicate) -> Self {
        SpecAst::Ensuring(Box::new(self), b)
    }

    pub fn then(self, next: SpecAst) -> Self {
        SpecAst::Seq(Box::new(self), Box::new(next))
    }

    pub fn or(self, other: SpecAst) -> Self {
        SpecAst::Or(Box::new(self), Box::new(other))
    }

    /// Number of binary/unary connectives (`ensuring`, `;`, `or`).
    pub fn connectives(&self) -> usize {
        match self {
            SpecAst::Achieve(_) => 0,
            SpecAst::Ensuring(phi, _) => 1 + phi.connectives(),
            SpecAst::Seq(a, b) | SpecAst::Or(a, b) => 1 + a.connectives() + b.connectives(),
        }
    }
}

impl fmt::Display for SpecAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_spec(self))
    }
}

/// Atoms true in one state.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSet {
    atoms: BTreeSet<String>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms<I, S>(atoms: I) -> Result<Self, SpecError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = LabelSet::new();
        for a in atoms {
            set.insert(a)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, atom: impl Into<String>) -> Result<(), SpecError> {
        let atom = atom.into();
        if !is_identifier(&atom) {
            return Err(SpecError::InvalidAtom(atom));
        }
        self.atoms.insert(atom);
        Ok(())
    }

    pub fn contains(&self, atom: &str) -> bool {
        self.atoms.contains(atom)
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(String::as_str)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// Sequence of label sets observed along a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTrace {
    pub steps: Vec<LabelSet>,
}

impl LabelTrace {
    pub fn new(steps: Vec<LabelSet>) -> Self {
        Self { steps }
    }

    pub fn push(&mut self, labels: LabelSet) {
        self.steps.push(labels);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl FromIterator<LabelSet> for LabelTrace {
    fn from_iter<T: IntoIterator<Item = LabelSet>>(iter: T) -> Self {
        Self { steps: iter.into_iter().collect() }
    }
}

pub fn eval_pred(b: &Predicate, labels: &LabelSet) -> bool {
    match b {
        Predicate::Literal(lit) => labels.contains(&lit.name) != lit.negated,
        Predicate::And(l, r) => eval_pred(l, labels) && eval_pred(r, labels),
        Predicate::Or(l, r) => eval_pred(l, labels) || eval_pred(r, labels),
    }
}

/// Prefix satisfaction: true iff some prefix `trace[0..=t]` satisfies `phi`.
///
/// `ensuring b` is read universally: `b` must hold at every step of the
/// interval the inner formula is evaluated on.
///
/// Works by propagating sets of feasible interval start points forward: for
/// a set of starts `S`, `ends(phi, S)` is the set of `j` such that `phi`
/// holds on `[i..=j]` for some `i` in `S`. Sequencing feeds `k + 1` for every
/// end `k` of the left side in as the starts of the right side. Linear in the
/// trace length per connective except under `ensuring`, which splits the
/// window at every violation of its predicate.
pub fn sat_spec(phi: &SpecAst, trace: &LabelTrace) -> Result<bool, SpecError> {
    if trace.is_empty() {
        return Err(SpecError::EmptyTrace);
    }
    let n = trace.len();
    let mut starts = vec![false; n];
    starts[0] = true;
    Ok(ends(phi, &trace.steps, 0, n, &starts).into_iter().any(|b| b))
}

/// Evaluates on the window `[lo, hi)`; `starts` and the result are indexed
/// relative to `lo`.
fn ends(phi: &SpecAst, steps: &[LabelSet], lo: usize, hi: usize, starts: &[bool]) -> Vec<bool> {
    let len = hi - lo;
    let mut out = vec![false; len];
    match phi {
        SpecAst::Achieve(b) => {
            if let Some(first) = starts.iter().position(|&s| s) {
                if let Some(m) = (first..len).find(|&k| eval_pred(b, &steps[lo + k])) {
                    out[m..].iter_mut().for_each(|o| *o = true);
                }
            }
        }
        SpecAst::Or(a, b) => {
            let ea = ends(a, steps, lo, hi, starts);
            let eb = ends(b, steps, lo, hi, starts);
            for (o, (x, y)) in out.iter_mut().zip(ea.into_iter().zip(eb)) {
                *o = x || y;
            }
        }
        SpecAst::Seq(a, b) => {
            let ea = ends(a, steps, lo, hi, starts);
            let mut next = vec![false; len];
            if len > 1 {
                next[1..].copy_from_slice(&ea[..len - 1]);
            }
            if next.iter().any(|&s| s) {
                out = ends(b, steps, lo, hi, &next);
            }
        }
        SpecAst::Ensuring(inner, b) => {
            let mut k = 0;
            while k < len {
                if !eval_pred(b, &steps[lo + k]) {
                    k += 1;
                    continue;
                }
                let block_start = k;
                while k < len && eval_pred(b, &steps[lo + k]) {
                    k += 1;
                }
                let block = &starts[block_start..k];
                if block.iter().any(|&s| s) {
                    let e = ends(inner, steps, lo + block_start, lo + k, block);
                    out[block_start..k].copy_from_slice(&e);
                }
            }
        }
    }
    out
}
