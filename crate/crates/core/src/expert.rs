//! Expert channels: who answers the planner's queries.
//!
//! Oracle rule file format:
//!
//! ```text
//! (rule (atom*) (TASK term*) (pref ...) [:max-uses N])
//! ```
//!
//! A rule fires when its task pattern unifies with the queried task and its
//! conditions hold in the queried state; the first live rule in file order
//! answers.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Task};
use crate::error::{FileError, ParseError};
use crate::parse::{conj, task_expr};
use crate::policy::MethodScore;
use crate::preference::{
    parse_preference_list, preference_from_sexpr, Origin, Preference, PreferenceStore,
};
use crate::sexpr::{read_all, Sexpr};
use crate::state::State;
use crate::term::{match_atom, Atom, Substitution};

/// The question posed at an uncertain node: its state and task, with the
/// candidate methods as currently scored.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub node_id: u64,
    pub state: State,
    pub task: Task,
    pub candidates: Vec<MethodScore>,
    pub entropy: f64,
    pub node_depth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExpertResponse {
    Preference(Preference),
    Decline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Scripted,
    Upfront,
    Human,
    Silent,
}

pub trait ExpertChannel {
    fn kind(&self) -> ChannelKind;

    fn answer(&mut self, query: &Query) -> ExpertResponse;
}

/// Declines every query.
#[derive(Clone, Copy, Debug, Default)]
pub struct SilentExpert;

impl ExpertChannel for SilentExpert {
    fn kind(&self) -> ChannelKind {
        ChannelKind::Silent
    }

    fn answer(&mut self, _query: &Query) -> ExpertResponse {
        ExpertResponse::Decline
    }
}

/// Stands in for an expert whose whole input was given before planning.
/// Never queried; the upfront strategy does not ask.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpfrontExpert;

impl ExpertChannel for UpfrontExpert {
    fn kind(&self) -> ChannelKind {
        ChannelKind::Upfront
    }

    fn answer(&mut self, query: &Query) -> ExpertResponse {
        debug_assert!(false, "upfront channel queried at node {}", query.node_id);
        ExpertResponse::Decline
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRule {
    pub conditions: Vec<Atom>,
    pub task_pattern: Task,
    pub respond_with: Preference,
    pub max_uses: Option<usize>,
}

impl OracleRule {
    pub fn matches(&self, state: &State, task: &Task) -> bool {
        match match_atom(
            &self.task_pattern.as_atom(),
            &task.as_atom(),
            &Substitution::new(),
        ) {
            Some(theta) => state.holds(&self.conditions, &theta),
            None => false,
        }
    }
}

/// File-driven stand-in for a human expert.
#[derive(Clone, Debug)]
pub struct ScriptedOracle {
    rules: Vec<OracleRule>,
    uses: Vec<usize>,
    flip_prob: f64,
    rng: ChaCha8Rng,
}

impl ScriptedOracle {
    pub fn new(rules: Vec<OracleRule>) -> Self {
        let uses = vec![0; rules.len()];
        ScriptedOracle {
            rules,
            uses,
            flip_prob: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// With probability `p` an answer has its prefer/avoid sets swapped.
    pub fn with_flip_prob(mut self, p: f64, seed: u64) -> Self {
        self.flip_prob = p.clamp(0.0, 1.0);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn rules(&self) -> &[OracleRule] {
        &self.rules
    }

    pub fn parse(text: &str, domain: &Domain) -> Result<Self, ParseError> {
        let rules = read_all(text)?
            .iter()
            .map(|f| oracle_rule(f, domain))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScriptedOracle::new(rules))
    }

    pub fn load(path: impl AsRef<Path>, domain: &Domain) -> Result<Self, FileError> {
        let path = path.as_ref();
        let text = read_file(path)?;
        Self::parse(&text, domain).map_err(|source| FileError::Parse {
            path: path.display().to_string(),
            source,
        })
    }
}

impl ExpertChannel for ScriptedOracle {
    fn kind(&self) -> ChannelKind {
        ChannelKind::Scripted
    }

    fn answer(&mut self, query: &Query) -> ExpertResponse {
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.max_uses.is_some_and(|m| self.uses[i] >= m) {
                continue;
            }
            if rule.matches(&query.state, &query.task) {
                self.uses[i] += 1;
                let mut pref = rule.respond_with.clone();
                if self.flip_prob > 0.0 && self.rng.random_bool(self.flip_prob) {
                    std::mem::swap(&mut pref.preferred, &mut pref.non_preferred);
                }
                return ExpertResponse::Preference(pref);
            }
        }
        ExpertResponse::Decline
    }
}

fn oracle_rule(sx: &Sexpr, domain: &Domain) -> Result<OracleRule, ParseError> {
    let items = sx.expect_list("'(rule'")?;
    match items.first().and_then(Sexpr::as_symbol) {
        Some("rule") => {}
        _ => {
            return Err(ParseError::syntax(
                items.first().map(Sexpr::pos).unwrap_or(sx.pos()),
                "'rule'",
            ))
        }
    }
    if items.len() != 4 && items.len() != 6 {
        return Err(ParseError::syntax(
            sx.pos(),
            "(rule conj task (pref ...) [:max-uses N])",
        ));
    }
    let conditions = conj(&items[1], domain)?;
    let task_pattern = task_expr(&items[2], domain)?;
    let respond_with = preference_from_sexpr(&items[3], domain)?;
    let max_uses = if items.len() == 6 {
        if items[4].as_symbol() != Some(":max-uses") {
            return Err(ParseError::syntax(items[4].pos(), "':max-uses'"));
        }
        let n = items[5]
            .expect_symbol("integer")?
            .parse::<usize>()
            .map_err(|_| ParseError::syntax(items[5].pos(), "non-negative integer"))?;
        Some(n)
    } else {
        None
    };
    Ok(OracleRule {
        conditions,
        task_pattern,
        respond_with,
        max_uses,
    })
}

fn read_file(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a file of `pref` forms into a store; every origin is upfront.
pub fn load_upfront(path: impl AsRef<Path>, domain: &Domain) -> Result<PreferenceStore, FileError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let to_err = |source| FileError::Parse {
        path: path.display().to_string(),
        source,
    };
    let prefs = parse_preference_list(&text, domain).map_err(to_err)?;
    let prefs = prefs
        .into_iter()
        .map(|p| Preference {
            origin: Origin::Upfront,
            ..p
        })
        .collect();
    Ok(PreferenceStore::from_prefs(prefs).expect("ids checked by parse_preference_list"))
}

/// Renders the elicited preferences of `store` in the upfront file format.
pub fn elicited_text(store: &PreferenceStore) -> String {
    let mut out = String::new();
    for p in store
        .prefs()
        .iter()
        .filter(|p| matches!(p.origin, Origin::Elicited { .. }))
    {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

/// Writes the elicited preferences so `load_upfront` can replay them.
pub fn log_elicited(store: &PreferenceStore, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, elicited_text(store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_domain, resolve_task};
    use crate::term::Term;

    fn domain() -> Domain {
        parse_domain(
            "(defdomain bw ((:predicate Space 1) (:predicate On 2)
               (:operator (noop) () () ())
               (:method PutOnTable (Clear ?b) () ())
               (:method StackonE (Clear ?b) () ())))",
        )
        .unwrap()
    }

    fn query(state: State) -> Query {
        let d = domain();
        Query {
            node_id: 0,
            state,
            task: resolve_task(&d, "Clear", vec![Term::constant("B")]).unwrap(),
            candidates: vec![],
            entropy: 1.0,
            node_depth: 0,
        }
    }

    const RULE: &str = "(rule ((Space Table)) (Clear ?b)
        (pref p1 ((Space Table)) (Clear ?b) (:prefer PutOnTable) (:avoid StackonE)) :max-uses 1)";

    #[test]
    fn silent_declines() {
        assert_eq!(
            SilentExpert.answer(&query(State::new())),
            ExpertResponse::Decline
        );
    }

    #[test]
    fn scripted_budget_exhausts() {
        let d = domain();
        let mut oracle = ScriptedOracle::parse(RULE, &d).unwrap();
        let q = query([Atom::ground("Space", &["Table"])].into_iter().collect());
        match oracle.answer(&q) {
            ExpertResponse::Preference(p) => assert_eq!(p.id.as_str(), "p1"),
            r => panic!("{r:?}"),
        }
        assert_eq!(oracle.answer(&q), ExpertResponse::Decline);
    }

    #[test]
    fn scripted_requires_conditions() {
        let d = domain();
        let mut oracle = ScriptedOracle::parse(RULE, &d).unwrap();
        assert_eq!(oracle.answer(&query(State::new())), ExpertResponse::Decline);
    }

    #[test]
    fn flip_swaps_sets() {
        let d = domain();
        let mut oracle = ScriptedOracle::parse(RULE, &d)
            .unwrap()
            .with_flip_prob(1.0, 7);
        let q = query([Atom::ground("Space", &["Table"])].into_iter().collect());
        let ExpertResponse::Preference(p) = oracle.answer(&q) else {
            panic!()
        };
        assert!(p.prefers("StackonE") && p.avoids("PutOnTable"));
    }

    #[test]
    fn upfront_file_round_trip() {
        let d = domain();
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.prefs");
        fs::write(&empty, "").unwrap();
        assert!(load_upfront(&empty, &d).unwrap().is_empty());

        let mut store = PreferenceStore::new();
        let mut p = crate::preference::parse_preference(
            "(pref p1 ((Space Table)) (Clear ?b) (:prefer PutOnTable) (:avoid StackonE))",
            &d,
        )
        .unwrap();
        p.origin = Origin::Elicited { depth: 3 };
        store.add(p.clone()).unwrap();
        let log = dir.path().join("elicited.prefs");
        log_elicited(&store, &log).unwrap();
        let back = load_upfront(&log, &d).unwrap();
        assert_eq!(back.len(), 1);
        assert!(back.prefs()[0].same_content(&p));
        assert_eq!(back.prefs()[0].id, p.id);

        let dup = dir.path().join("dup.prefs");
        fs::write(&dup, format!("{p}\n{p}\n")).unwrap();
        match load_upfront(&dup, &d) {
            Err(FileError::Parse {
                source: ParseError::DuplicateId { pos, .. },
                ..
            }) => assert_eq!(pos.line, 2),
            r => panic!("{r:?}"),
        }
    }
}
