//! Expert preferences: IF-THEN statements that favour (`:prefer`) or
//! disfavour (`:avoid`) methods for a task when state conditions hold.
//!
//! ```text
//! (pref ID (atom*) (TASK term*) (:prefer ID*) (:avoid ID*))
//! ```
//!
//! An empty condition list means the preference applies to every instance of
//! the task. Generality is expressed by the mix of variables and constants in
//! the conditions and the task pattern.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Task, TaskKind};
use crate::error::{ParseError, StoreError};
use crate::parse::{conj, ident, task_expr};
use crate::sexpr::{read_all, read_one, Sexpr};
use crate::state::State;
use crate::term::{match_atom, ordered_variables, Atom, Ident, Substitution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Upfront,
    /// Acquired from the expert at the given search depth.
    Elicited {
        depth: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preference {
    pub id: Ident,
    pub conditions: Vec<Atom>,
    pub task_pattern: Task,
    pub preferred: Vec<Ident>,
    pub non_preferred: Vec<Ident>,
    pub origin: Origin,
}

impl Preference {
    /// Same statement, ignoring id and origin.
    pub fn same_content(&self, other: &Preference) -> bool {
        self.conditions == other.conditions
            && self.task_pattern == other.task_pattern
            && self.preferred.iter().collect::<BTreeSet<_>>()
                == other.preferred.iter().collect::<BTreeSet<_>>()
            && self.non_preferred.iter().collect::<BTreeSet<_>>()
                == other.non_preferred.iter().collect::<BTreeSet<_>>()
    }

    pub fn prefers(&self, method: &str) -> bool {
        self.preferred.iter().any(|m| m.as_str() == method)
    }

    pub fn avoids(&self, method: &str) -> bool {
        self.non_preferred.iter().any(|m| m.as_str() == method)
    }

    /// Variables of the task pattern followed by condition-only variables.
    fn variables(&self) -> Vec<Ident> {
        let head = self.task_pattern.as_atom();
        ordered_variables(std::iter::once(&head).chain(self.conditions.iter()), &[])
    }
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(pref {} (", self.id)?;
        for (i, a) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ") {} (:prefer", self.task_pattern)?;
        for m in &self.preferred {
            write!(f, " {m}")?;
        }
        f.write_str(") (:avoid")?;
        for m in &self.non_preferred {
            write!(f, " {m}")?;
        }
        f.write_str("))")
    }
}

fn method_set(
    sx: &Sexpr,
    kw: &str,
    domain: &Domain,
    task: &Ident,
) -> Result<Vec<Ident>, ParseError> {
    let items = sx.expect_list(&format!("'({kw} ID*)'"))?;
    match items.first().and_then(Sexpr::as_symbol) {
        Some(s) if s == kw => {}
        _ => {
            return Err(ParseError::syntax(
                items.first().map(Sexpr::pos).unwrap_or(sx.pos()),
                &format!("'{kw}'"),
            ))
        }
    }
    let mut out: Vec<Ident> = Vec::new();
    for item in &items[1..] {
        let id = ident(item, "method id")?;
        let method = domain
            .method(id.as_str())
            .ok_or_else(|| ParseError::UnknownMethodId {
                id: id.to_string(),
                pos: item.pos(),
            })?;
        if &method.task != task {
            return Err(ParseError::TaskMismatch {
                id: id.to_string(),
                task: task.to_string(),
                pos: item.pos(),
            });
        }
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// Parses one `(pref ...)` form that has already been read.
pub fn preference_from_sexpr(sx: &Sexpr, domain: &Domain) -> Result<Preference, ParseError> {
    let items = sx.expect_list("'(pref'")?;
    match items.first().and_then(Sexpr::as_symbol) {
        Some("pref") => {}
        _ => {
            return Err(ParseError::syntax(
                items.first().map(Sexpr::pos).unwrap_or(sx.pos()),
                "'pref'",
            ))
        }
    }
    if items.len() != 6 {
        return Err(ParseError::syntax(
            sx.pos(),
            "(pref ID conj task (:prefer ID*) (:avoid ID*))",
        ));
    }
    let id = ident(&items[1], "preference id")?;
    let conditions = conj(&items[2], domain)?;
    let task_pattern = task_expr(&items[3], domain)?;
    if task_pattern.kind == TaskKind::Primitive {
        return Err(ParseError::syntax(
            items[3].pos(),
            "a compound task (primitive tasks have no methods)",
        ));
    }
    let preferred = method_set(&items[4], ":prefer", domain, &task_pattern.name)?;
    let non_preferred = method_set(&items[5], ":avoid", domain, &task_pattern.name)?;
    if let Some(m) = preferred.iter().find(|m| non_preferred.contains(m)) {
        return Err(ParseError::Overlap {
            id: m.to_string(),
            pos: items[5].pos(),
        });
    }
    Ok(Preference {
        id,
        conditions,
        task_pattern,
        preferred,
        non_preferred,
        origin: Origin::Upfront,
    })
}

/// Parses and validates a single preference against `domain`.
pub fn parse_preference(text: &str, domain: &Domain) -> Result<Preference, ParseError> {
    preference_from_sexpr(&read_one(text)?, domain)
}

/// Parses a file of `pref` forms; ids must be unique.
pub fn parse_preference_list(text: &str, domain: &Domain) -> Result<Vec<Preference>, ParseError> {
    let mut out: Vec<Preference> = Vec::new();
    let mut seen = HashSet::new();
    for form in read_all(text)? {
        let p = preference_from_sexpr(&form, domain)?;
        if !seen.insert(p.id.clone()) {
            return Err(ParseError::DuplicateId {
                id: p.id.to_string(),
                pos: form.pos(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

/// One application of a preference at a decision node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub pref: String,
    pub depth: usize,
    pub max_depth: usize,
    pub influenced: bool,
    pub problem: String,
}

impl UsageRecord {
    /// Depth normalised by the run's maximum depth; 0 when the run never
    /// went below the root.
    pub fn depth_ratio(&self) -> f64 {
        if self.max_depth == 0 {
            0.0
        } else {
            self.depth as f64 / self.max_depth as f64
        }
    }
}

/// Percentage of usages that changed the chosen method; `None` without usages.
pub fn influence_percent(records: &[UsageRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let hit = records.iter().filter(|r| r.influenced).count();
    Some(100.0 * hit as f64 / records.len() as f64)
}

/// Serialises records as JSON Lines.
pub fn usage_to_jsonl(records: &[UsageRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("usage record serialises"));
        out.push('\n');
    }
    out
}

pub fn usage_from_jsonl(text: &str) -> Result<Vec<UsageRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Ordered, append-only set of preferences plus the usage log of the
/// current run.
#[derive(Clone, Debug, Default)]
pub struct PreferenceStore {
    prefs: Vec<Preference>,
    usage: Vec<UsageRecord>,
}

impl PreferenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_prefs(prefs: Vec<Preference>) -> Result<Self, StoreError> {
        let mut s = Self::new();
        for p in prefs {
            s.add(p)?;
        }
        Ok(s)
    }

    pub fn add(&mut self, pref: Preference) -> Result<(), StoreError> {
        if self.get(pref.id.as_str()).is_some() {
            return Err(StoreError::DuplicateId(pref.id.to_string()));
        }
        self.prefs.push(pref);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Preference> {
        self.prefs.iter().find(|p| p.id.as_str() == id)
    }

    pub fn prefs(&self) -> &[Preference] {
        &self.prefs
    }

    pub fn len(&self) -> usize {
        self.prefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefs.is_empty()
    }

    /// A store holding `self`'s preferences followed by `other`'s.
    pub fn union(&self, other: &PreferenceStore) -> Result<Self, StoreError> {
        Self::from_prefs(
            self.prefs
                .iter()
                .chain(other.prefs.iter())
                .cloned()
                .collect(),
        )
    }

    pub fn record_usage(
        &mut self,
        pref_id: &str,
        node_depth: usize,
        changed_argmax: bool,
    ) -> Result<(), StoreError> {
        if self.get(pref_id).is_none() {
            return Err(StoreError::UnknownPreferenceId(pref_id.to_string()));
        }
        self.usage.push(UsageRecord {
            pref: pref_id.to_string(),
            depth: node_depth,
            max_depth: 0,
            influenced: changed_argmax,
            problem: String::new(),
        });
        Ok(())
    }

    pub fn usage(&self) -> &[UsageRecord] {
        &self.usage
    }

    /// Removes the usage log, stamping each record with the run's maximum
    /// depth and problem name.
    pub fn take_usage(&mut self, max_depth: usize, problem: &str) -> Vec<UsageRecord> {
        let mut out = std::mem::take(&mut self.usage);
        for r in &mut out {
            r.max_depth = max_depth;
            r.problem = problem.to_string();
        }
        out
    }
}

/// Preferences whose task pattern unifies with `task` and whose conditions
/// hold in `state`, in store order, each with its first binding under the
/// canonical order.
pub fn applicable_preferences<'s>(
    store: &'s PreferenceStore,
    state: &State,
    task: &Task,
) -> Vec<(&'s Preference, Substitution)> {
    let ground = task.as_atom();
    let mut out = Vec::new();
    for pref in store.prefs() {
        let Some(head) = match_atom(&pref.task_pattern.as_atom(), &ground, &Substitution::new())
        else {
            continue;
        };
        let vars = pref.variables();
        let best = state
            .satisfy(&pref.conditions, &head)
            .into_iter()
            .min_by(|a, b| {
                vars.iter()
                    .map(|v| a.get(v))
                    .cmp(vars.iter().map(|v| b.get(v)))
            });
        if let Some(theta) = best {
            out.push((pref, theta));
        }
    }
    out
}

/// `N⁺ − N⁻` for `method_id` over the applicable preferences.
pub fn adherence<'a>(method_id: &str, applicable: impl IntoIterator<Item = &'a Preference>) -> i64 {
    applicable
        .into_iter()
        .map(|p| {
            if p.prefers(method_id) {
                1
            } else if p.avoids(method_id) {
                -1
            } else {
                0
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_domain;

    fn domain() -> Domain {
        parse_domain(
            "(defdomain bw ((:predicate Space 1) (:predicate On 2)
               (:operator (noop) () () ())
               (:method PutOnTable (Clear ?b) () ())
               (:method StackonE (Clear ?b) () ())
               (:method m1 (Clear ?b) () ())
               (:method other (Move ?b) () ())))",
        )
        .unwrap()
    }

    #[test]
    fn parses_generalized_preference() {
        let d = domain();
        let p = parse_preference(
            "(pref p1 ((Space Table)) (Clear ?b) (:prefer PutOnTable) (:avoid StackonE))",
            &d,
        )
        .unwrap();
        assert_eq!(p.conditions, vec![Atom::ground("Space", &["Table"])]);
        assert_eq!(p.preferred, vec![Ident::new("PutOnTable")]);
        assert_eq!(p.non_preferred, vec![Ident::new("StackonE")]);
        assert_eq!(parse_preference(&p.to_string(), &d).unwrap(), p);
    }

    #[test]
    fn unconditional_preference() {
        let p =
            parse_preference("(pref p2 () (Clear ?b) (:prefer m1) (:avoid))", &domain()).unwrap();
        assert!(p.conditions.is_empty());
        assert!(p.non_preferred.is_empty());
    }

    #[test]
    fn validation_errors() {
        let d = domain();
        let overlap = parse_preference("(pref p3 () (Clear ?b) (:prefer m1) (:avoid m1))", &d);
        assert!(matches!(overlap, Err(ParseError::Overlap { .. })));
        let unknown = parse_preference("(pref p4 () (Clear ?b) (:prefer nope) (:avoid))", &d);
        assert!(matches!(unknown, Err(ParseError::UnknownMethodId { .. })));
        let mismatch = parse_preference("(pref p5 () (Clear ?b) (:prefer other) (:avoid))", &d);
        assert!(matches!(mismatch, Err(ParseError::TaskMismatch { .. })));
        let dup = parse_preference_list(
            "(pref a () (Clear ?b) (:prefer m1) (:avoid))\n(pref a () (Clear ?b) (:prefer m1) (:avoid))",
            &d,
        );
        assert!(matches!(dup, Err(ParseError::DuplicateId { .. })));
    }

    #[test]
    fn usage_and_influence() {
        let d = domain();
        let mut store = PreferenceStore::new();
        assert_eq!(influence_percent(store.usage()), None);
        store
            .add(parse_preference("(pref p () (Clear ?b) (:prefer m1) (:avoid))", &d).unwrap())
            .unwrap();
        for i in 0..5 {
            store.record_usage("p", i, i != 2).unwrap();
        }
        assert_eq!(influence_percent(store.usage()), Some(80.0));
        assert!(matches!(
            store.record_usage("q", 0, true),
            Err(StoreError::UnknownPreferenceId(_))
        ));
        let recs = store.take_usage(5, "prob");
        let ratios: Vec<f64> = recs
            .iter()
            .skip(1)
            .take(3)
            .map(UsageRecord::depth_ratio)
            .collect();
        assert_eq!(ratios, vec![0.2, 0.4, 0.6]);
        assert_eq!(usage_from_jsonl(&usage_to_jsonl(&recs)).unwrap(), recs);
        assert!(store.usage().is_empty());
    }
}
