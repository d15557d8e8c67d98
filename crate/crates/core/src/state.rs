//! World states and conjunctive matching against them.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::term::{match_atom, Atom, Ident, Substitution};

/// A set of ground atoms.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    atoms: BTreeSet<Atom>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    /// Builds a state; panics on non-ground atoms, which the parsers reject
    /// before they get here.
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let atoms: BTreeSet<Atom> = atoms.into_iter().collect();
        assert!(
            atoms.iter().all(Atom::is_ground),
            "state atoms must be ground"
        );
        State { atoms }
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn insert(&mut self, atom: Atom) -> bool {
        debug_assert!(atom.is_ground());
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.atoms.remove(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    /// All facts whose predicate is `predicate`.
    pub fn facts_with<'a>(&'a self, predicate: &'a Ident) -> impl Iterator<Item = &'a Atom> + 'a {
        let lo = Atom {
            predicate: predicate.clone(),
            args: Vec::new(),
        };
        self.atoms
            .range(lo..)
            .take_while(move |a| &a.predicate == predicate)
    }

    /// Stable 64-bit fingerprint, identical across runs for equal states.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    /// Every extension of `subst` under which all of `conj` holds, in
    /// depth-first discovery order.
    pub fn satisfy(&self, conj: &[Atom], subst: &Substitution) -> Vec<Substitution> {
        let mut out = Vec::new();
        self.satisfy_rec(conj, subst.clone(), &mut out);
        out
    }

    /// True when at least one extension of `subst` satisfies `conj`.
    pub fn holds(&self, conj: &[Atom], subst: &Substitution) -> bool {
        self.first_match(conj, subst.clone()).is_some()
    }

    fn first_match(&self, conj: &[Atom], subst: Substitution) -> Option<Substitution> {
        let Some((head, rest)) = conj.split_first() else {
            return Some(subst);
        };
        let pattern = head.apply(&subst);
        if pattern.is_ground() {
            return if self.contains(&pattern) {
                self.first_match(rest, subst)
            } else {
                None
            };
        }
        for fact in self.facts_with(&pattern.predicate) {
            if let Some(ext) = match_atom(&pattern, fact, &subst) {
                if let Some(found) = self.first_match(rest, ext) {
                    return Some(found);
                }
            }
        }
        None
    }

    fn satisfy_rec(&self, conj: &[Atom], subst: Substitution, out: &mut Vec<Substitution>) {
        let Some((head, rest)) = conj.split_first() else {
            out.push(subst);
            return;
        };
        let pattern = head.apply(&subst);
        if pattern.is_ground() {
            if self.contains(&pattern) {
                self.satisfy_rec(rest, subst, out);
            }
            return;
        }
        for fact in self.facts_with(&pattern.predicate) {
            if let Some(ext) = match_atom(&pattern, fact, &subst) {
                self.satisfy_rec(rest, ext, out);
            }
        }
    }
}

impl FromIterator<Atom> for State {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        State::from_atoms(iter)
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms.iter()).finish()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Number of goal atoms not present in `state`.
pub fn goal_distance(state: &State, goal: &BTreeSet<Atom>) -> usize {
    goal.iter().filter(|g| !state.contains(g)).count()
}
