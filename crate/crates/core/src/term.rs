//! Identifiers, terms, atoms and substitutions.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A case-sensitive identifier. Cheap to clone; ordered by its text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ident(Arc<str>);

impl Ident {
    pub fn new(s: &str) -> Self {
        Ident(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `[A-Za-z][A-Za-z0-9_-]*`
    pub fn is_valid(s: &str) -> bool {
        let mut chars = s.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Borrow<str> for Ident {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

/// A constant or a variable. Variables print with a leading `?`; the stored
/// name never includes it.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Ident),
    Var(Ident),
}

impl Term {
    pub fn constant(s: &str) -> Self {
        Term::Const(Ident::new(s))
    }

    pub fn var(s: &str) -> Self {
        Term::Var(Ident::new(s.trim_start_matches('?')))
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    /// Resolves the term under `subst`; unbound variables stay variables.
    pub fn apply(&self, subst: &Substitution) -> Term {
        match self {
            Term::Var(v) => match subst.get(v) {
                Some(c) => Term::Const(c.clone()),
                None => self.clone(),
            },
            Term::Const(_) => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "{c}"),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A predicate applied to terms, e.g. `(On A B)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: Ident,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: Ident::new(predicate),
            args,
        }
    }

    /// Ground atom from constant names.
    pub fn ground(predicate: &str, args: &[&str]) -> Self {
        Atom::new(predicate, args.iter().map(|a| Term::constant(a)).collect())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn apply(&self, subst: &Substitution) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.apply(subst)).collect(),
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &Ident> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Variable name → constant.
pub type Substitution = BTreeMap<Ident, Ident>;

/// Tries to extend `subst` so that `pattern` equals `fact`, a ground atom.
pub fn match_atom(pattern: &Atom, fact: &Atom, subst: &Substitution) -> Option<Substitution> {
    if pattern.predicate != fact.predicate || pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut out = subst.clone();
    for (p, g) in pattern.args.iter().zip(&fact.args) {
        let Term::Const(g) = g else { return None };
        match p {
            Term::Const(c) if c == g => {}
            Term::Const(_) => return None,
            Term::Var(v) => match out.get(v) {
                Some(bound) if bound == g => {}
                Some(_) => return None,
                None => {
                    out.insert(v.clone(), g.clone());
                }
            },
        }
    }
    Some(out)
}

/// Collects variables in first-appearance order without duplicates.
pub fn ordered_variables<'a>(
    atoms: impl IntoIterator<Item = &'a Atom>,
    seed: &[Ident],
) -> Vec<Ident> {
    let mut out: Vec<Ident> = seed.to_vec();
    for atom in atoms {
        for v in atom.variables() {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_syntax() {
        assert!(Ident::is_valid("PutOnTable"));
        assert!(Ident::is_valid("put-on_table2"));
        assert!(!Ident::is_valid("2x"));
        assert!(!Ident::is_valid(""));
        assert!(!Ident::is_valid("a.b"));
    }

    #[test]
    fn match_binds_and_checks_consistency() {
        let pat = Atom::new("On", vec![Term::var("x"), Term::var("x")]);
        let s = Substitution::new();
        assert!(match_atom(&pat, &Atom::ground("On", &["A", "B"]), &s).is_none());
        let m = match_atom(&pat, &Atom::ground("On", &["A", "A"]), &s).unwrap();
        assert_eq!(m.get("x").unwrap().as_str(), "A");
    }

    #[test]
    fn display_round_trip_form() {
        let a = Atom::new("On", vec![Term::var("x"), Term::constant("B")]);
        assert_eq!(a.to_string(), "(On ?x B)");
    }
}
