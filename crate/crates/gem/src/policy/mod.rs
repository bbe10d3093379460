//! Terms, atoms, clauses and the operations the evaluator needs on them:
//! unification, subsumption, variant checks and renaming apart.
//!
//! Programs are function-free: a term is either a variable or a constant,
//! so substitutions are flat maps and unification never recurses.

mod parser;

pub use parser::{parse_atom, parse_clause, parse_clauses, parse_policy, ParseError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A term: a variable (upper-case or `_`-initial name) or a constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => {
                // Quote constants that would not re-parse as a plain symbol.
                let plain = c
                    .chars()
                    .next()
                    .is_some_and(|ch| ch.is_ascii_lowercase() || ch.is_ascii_digit())
                    && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
                if plain {
                    write!(f, "{c}")
                } else {
                    write!(f, "'{c}'")
                }
            }
        }
    }
}

/// An atom `p(t0, t1, ..., tn)`. By convention `t0` is the *location*: the
/// principal whose engine evaluates the atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }

    /// The location argument (first argument).
    pub fn location(&self) -> &Term {
        &self.args[0]
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    /// Variables occurring in the atom, in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = t {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// A canonical form with variables numbered in order of first occurrence,
    /// equal for exactly the variants of this atom.
    pub fn variant_key(&self) -> String {
        let mut names: BTreeMap<&str, usize> = BTreeMap::new();
        let mut out = format!("{}/", self.pred);
        for t in &self.args {
            match t {
                Term::Const(c) => {
                    out.push_str("c:");
                    out.push_str(c);
                }
                Term::Var(v) => {
                    let n = names.len();
                    let ix = *names.entry(v.as_str()).or_insert(n);
                    out.push_str(&format!("v{ix}"));
                }
            }
            out.push(',');
        }
        out
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// A body literal: an atom or its negation-as-failure `not(atom)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, negated: false }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, negated: true }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not({})", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

/// A clause `head :- body.` (a fact when the body is empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn fact(head: Atom) -> Self {
        Clause { head, body: Vec::new() }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn vars(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |a: &Atom| {
            for v in a.vars() {
                if seen.insert(v.clone()) {
                    out.push(v);
                }
            }
        };
        push(&self.head);
        for l in &self.body {
            push(&l.atom);
        }
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

/// The policy of one principal: the clauses it owns, in textual order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    pub owner: String,
    pub clauses: Vec<Clause>,
}

impl Policy {
    pub fn new(owner: impl Into<String>) -> Self {
        Policy { owner: owner.into(), clauses: Vec::new() }
    }

    /// Facts whose head contains a variable; flagged at load time.
    pub fn non_ground_facts(&self) -> Vec<&Clause> {
        self.clauses
            .iter()
            .filter(|c| c.is_fact() && !c.head.is_ground())
            .collect()
    }
}

/// An idempotent substitution: a flat map from variable names to terms in
/// which no term in the range mentions a variable in the domain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    map: BTreeMap<String, Term>,
}

impl Subst {
    pub fn new() -> Self {
        Subst::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.map.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Follow variable bindings until a constant or unbound variable.
    fn walk<'a>(&'a self, t: &'a Term) -> &'a Term {
        let mut cur = t;
        while let Term::Var(v) = cur {
            match self.map.get(v) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur
    }

    /// Re-walk every binding so the substitution becomes idempotent.
    fn normalize(&mut self) {
        let keys: Vec<String> = self.map.keys().cloned().collect();
        for k in keys {
            let walked = self.walk(&Term::Var(k.clone())).clone();
            self.map.insert(k, walked);
        }
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        self.walk(t).clone()
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom {
            pred: a.pred.clone(),
            args: a.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    pub fn apply_literal(&self, l: &Literal) -> Literal {
        Literal { atom: self.apply_atom(&l.atom), negated: l.negated }
    }

    pub fn apply_clause(&self, c: &Clause) -> Clause {
        Clause {
            head: self.apply_atom(&c.head),
            body: c.body.iter().map(|l| self.apply_literal(l)).collect(),
        }
    }
}

/// Most general unifier of two atoms, if any.
pub fn unify(a: &Atom, b: &Atom) -> Option<Subst> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = Subst::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        let x = s.walk(x).clone();
        let y = s.walk(y).clone();
        if x == y {
            continue;
        }
        match (x, y) {
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                s.map.insert(v, t);
            }
            _ => return None, // two distinct constants
        }
    }
    s.normalize();
    Some(s)
}

/// One-sided matching: does `general` subsume `specific`, i.e. is there a
/// substitution s with general·s == specific?
pub fn subsumes(general: &Atom, specific: &Atom) -> bool {
    if general.pred != specific.pred || general.args.len() != specific.args.len() {
        return false;
    }
    let mut bind: BTreeMap<&str, &Term> = BTreeMap::new();
    for (g, s) in general.args.iter().zip(&specific.args) {
        match g {
            Term::Const(_) => {
                if g != s {
                    return false;
                }
            }
            Term::Var(v) => match bind.get(v.as_str()) {
                Some(prev) => {
                    if *prev != s {
                        return false;
                    }
                }
                None => {
                    bind.insert(v, s);
                }
            },
        }
    }
    true
}

/// Equality up to variable renaming.
pub fn variant(a: &Atom, b: &Atom) -> bool {
    subsumes(a, b) && subsumes(b, a)
}

/// Rename every variable of `clause` to a fresh `_G<n>` name drawn from
/// `counter`, skipping names present in `avoid`.
pub fn rename_clause_apart(
    clause: &Clause,
    avoid: &BTreeSet<String>,
    counter: &mut u64,
) -> Clause {
    let mut s = Subst::new();
    for v in clause.vars() {
        s.map.insert(v, Term::Var(fresh_name(avoid, counter)));
    }
    s.apply_clause(clause)
}

/// Rename every variable of `atom` to a fresh name; used when importing a
/// received answer into a local derivation.
pub fn rename_atom_apart(atom: &Atom, avoid: &BTreeSet<String>, counter: &mut u64) -> Atom {
    let mut s = Subst::new();
    for v in atom.vars() {
        s.map.insert(v, Term::Var(fresh_name(avoid, counter)));
    }
    s.apply_atom(atom)
}

fn fresh_name(avoid: &BTreeSet<String>, counter: &mut u64) -> String {
    loop {
        let name = format!("_G{}", *counter);
        *counter += 1;
        if !avoid.contains(&name) {
            return name;
        }
    }
}
