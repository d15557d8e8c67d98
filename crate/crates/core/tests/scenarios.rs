//! End-to-end behaviour on the shipped blocks-world fixture: the three-tower
//! scene with task (Clear B), and the table-not-E preference.

use std::collections::BTreeSet;

use pgplan_core::expert::elicited_text;
use pgplan_core::preference::{adherence, applicable_preferences, parse_preference};
use pgplan_core::rollout::rollout;
use pgplan_core::{
    admissible_methods, apply_task, eval_node, load_upfront, parse_atom, parse_domain,
    parse_problem, parse_task, pg_search, Atom, Domain, ExpertChannel, ExpertResponse, Ident,
    PreferenceStore, Problem, Query, ScriptedOracle, SearchNode, SearchParams, SilentExpert, State,
    Strategy,
};

const TABLE_NOT_E: &str =
    "(pref p1 ((Space Table)) (Clear ?b) (:prefer PutOnTable) (:avoid StackonE))";

fn fixture(rel: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/../../fixtures/{rel}",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

fn scene() -> (Domain, Problem) {
    let d = parse_domain(&fixture("blocksworld/domain.dom")).unwrap();
    let p = parse_problem(&fixture("blocksworld/fig1.prob"), &d).unwrap();
    (d, p)
}

fn atoms(d: &Domain, texts: &[&str]) -> BTreeSet<Atom> {
    texts.iter().map(|t| parse_atom(t, d).unwrap()).collect()
}

fn root(p: &Problem) -> SearchNode {
    SearchNode {
        state: p.initial_state.clone(),
        task: p.initial_tasks[0].clone(),
        depth: 0,
        partial_plan: vec![],
    }
}

fn store_with(d: &Domain, text: &str) -> PreferenceStore {
    PreferenceStore::from_prefs(vec![parse_preference(text, d).unwrap()]).unwrap()
}

fn method_ids(state: &State, task: &str, d: &Domain) -> Vec<String> {
    let task = parse_task(task, d).unwrap();
    admissible_methods(state, &task, d)
        .iter()
        .map(|c| c.method.id.to_string())
        .collect()
}

#[test]
fn root_offers_table_and_two_stacks_and_a_fourth_appears_below() {
    let (d, p) = scene();
    assert_eq!(
        method_ids(&p.initial_state, "(Clear B)", &d),
        ["StackonD", "StackonE", "PutOnTable"]
    );
    // After F goes to the table it is clear, so stacking on F opens up.
    let next = apply_task(
        &p.initial_state,
        &d,
        &parse_task("(put-on-table F A B)", &d).unwrap(),
    )
    .unwrap();
    assert_eq!(
        method_ids(&next, "(Clear B)", &d),
        ["StackonD", "StackonE", "StackonF", "PutOnTable"]
    );
}

#[test]
fn putting_the_top_block_down_moves_it_to_the_table() {
    let (d, p) = scene();
    let next = apply_task(
        &p.initial_state,
        &d,
        &parse_task("(put-on-table F A B)", &d).unwrap(),
    )
    .unwrap();
    for a in atoms(&d, &["(OnTable F)", "(Clear A)"]) {
        assert!(next.contains(&a), "missing {a}");
    }
    assert!(!next.contains(&parse_atom("(On F A)", &d).unwrap()));
    assert!(apply_task(
        &p.initial_state,
        &d,
        &parse_task("(put-on-table A B B)", &d).unwrap()
    )
    .is_err());
}

#[test]
fn table_preference_applies_at_the_root_with_b_bound() {
    let (d, p) = scene();
    let store = store_with(&d, TABLE_NOT_E);
    let found = applicable_preferences(&store, &p.initial_state, &p.initial_tasks[0]);
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].1.get(&Ident::new("b")), Some(&Ident::new("B")));

    let prefs: Vec<_> = found.iter().map(|(p, _)| *p).collect();
    assert_eq!(adherence("PutOnTable", prefs.iter().copied()), 1);
    assert_eq!(adherence("StackonE", prefs.iter().copied()), -1);
    assert_eq!(adherence("StackonD", prefs.iter().copied()), 0);

    let no_table = State::from_atoms(
        p.initial_state
            .iter()
            .filter(|a| a.predicate.as_str() != "Space")
            .cloned(),
    );
    assert!(applicable_preferences(&store, &no_table, &p.initial_tasks[0]).is_empty());
}

#[test]
fn table_branch_rollout_ends_closer_to_a_table_goal() {
    let (d, p) = scene();
    let goal = atoms(&d, &["(OnTable F)", "(OnTable A)"]);
    let cands = admissible_methods(&p.initial_state, &p.initial_tasks[0], &d);
    let by_id = |id: &str| cands.iter().find(|c| c.method.id.as_str() == id).unwrap();
    let table = rollout(&p.initial_state, by_id("PutOnTable"), 3, &d, &goal);
    let onto_e = rollout(&p.initial_state, by_id("StackonE"), 3, &d, &goal);
    assert!(!table.dead_end && !onto_e.dead_end);
    assert!(table.distance < onto_e.distance, "{table:?} vs {onto_e:?}");
}

#[test]
fn table_preference_makes_put_on_table_the_unique_argmax() {
    let (d, p) = scene();
    let params = SearchParams::default();
    let goal = p.goal.clone();
    let plain = eval_node(&root(&p), &d, &goal, &PreferenceStore::new(), &params).unwrap();
    let guided = eval_node(&root(&p), &d, &goal, &store_with(&d, TABLE_NOT_E), &params).unwrap();
    let label = |pol: &pgplan_core::Policy, i: usize| pol.scores[i].method_id.clone();
    assert!(
        plain.entropy > params.entropy_threshold,
        "root is uncertain without advice"
    );
    assert_eq!(guided.argmax_set().len(), 1);
    assert_eq!(label(&guided, guided.argmax().unwrap()), "PutOnTable");
    let e = guided
        .scores
        .iter()
        .position(|s| s.method_id == "StackonE")
        .unwrap();
    assert!(guided.scores[e].probability < plain.scores[e].probability);
    // Adherence shifts the score by exactly its value.
    for (a, b) in plain.scores.iter().zip(&guided.scores) {
        assert!((b.score - a.score - b.adherence as f64).abs() < 1e-12);
    }
}

#[test]
fn preferences_about_a_symmetric_node_decide_the_argmax() {
    let d = parse_domain(
        "(defdomain sym ((:predicate At 1)
           (:operator (go ?x) () ((At Here)) ((At ?x)))
           (:method Left (Trip) () ((go L)))
           (:method Right (Trip) () ((go R)))))",
    )
    .unwrap();
    let p = parse_problem("(defproblem s sym ((At Here)) ((Trip)) ())", &d).unwrap();
    let params = SearchParams::default();
    let eval = |store: &PreferenceStore| eval_node(&root(&p), &d, &p.goal, store, &params).unwrap();
    let plain = eval(&PreferenceStore::new());
    assert_eq!(plain.argmax_set(), [0, 1]);
    assert!((plain.entropy - 2f64.ln()).abs() < 1e-12);
    let prefer_right = eval(&store_with(
        &d,
        "(pref r () (Trip) (:prefer Right) (:avoid))",
    ));
    assert_eq!(prefer_right.argmax_set(), [1]);
    let avoid_left = eval(&store_with(
        &d,
        "(pref l () (Trip) (:prefer) (:avoid Left))",
    ));
    assert_eq!(avoid_left.argmax_set(), [1]);
}

#[test]
fn answered_query_yields_a_plan_no_longer_than_unguided_search() {
    let (d, p) = scene();
    let params = SearchParams::default();
    let unguided = pg_search(
        &d,
        &p,
        &mut SilentExpert,
        &mut PreferenceStore::new(),
        &params,
        Strategy::None,
        None,
    );
    let mut oracle = ScriptedOracle::parse(
        &format!("(rule ((Space Table)) (Clear ?b) {TABLE_NOT_E} :max-uses 1)"),
        &d,
    )
    .unwrap();
    let mut store = PreferenceStore::new();
    let guided = pg_search(
        &d,
        &p,
        &mut oracle,
        &mut store,
        &params,
        Strategy::Active,
        None,
    );
    assert!(unguided.stats.solved && guided.stats.solved);
    assert!(guided.stats.queries_issued >= 1);
    assert_eq!(store.len(), 1);
    assert!(guided.stats.plan_len <= unguided.stats.plan_len);
    assert!(guided.plan().unwrap().steps[0]
        .to_string()
        .starts_with("(put-on-table"));
}

#[test]
fn elicited_preferences_replay_without_queries() {
    let (d, p) = scene();
    let params = SearchParams::default();
    let mut oracle = ScriptedOracle::load(
        format!(
            "{}/../../fixtures/blocksworld/oracle.orc",
            env!("CARGO_MANIFEST_DIR")
        ),
        &d,
    )
    .unwrap();
    let mut store = PreferenceStore::new();
    let active = pg_search(
        &d,
        &p,
        &mut oracle,
        &mut store,
        &params,
        Strategy::Active,
        None,
    );
    assert!(active.stats.prefs_acquired >= 1);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("elicited.prefs");
    std::fs::write(&path, elicited_text(&store)).unwrap();
    let mut replayed = load_upfront(&path, &d).unwrap();
    assert_eq!(replayed.len(), store.len());
    for (a, b) in replayed.prefs().iter().zip(store.prefs()) {
        assert_eq!(a.id, b.id);
        assert!(a.same_content(b));
    }
    let replay = pg_search(
        &d,
        &p,
        &mut SilentExpert,
        &mut replayed,
        &params,
        Strategy::Upfront,
        None,
    );
    assert!(replay.stats.solved);
    assert_eq!(replay.stats.queries_issued, 0);
    assert_eq!(replay.plan(), active.plan());
}

#[test]
fn identical_inputs_give_identical_runs() {
    let (d, p) = scene();
    let params = SearchParams {
        trace: true,
        ..SearchParams::default()
    };
    let run = || {
        let mut oracle = ScriptedOracle::parse(&fixture("blocksworld/oracle.orc"), &d).unwrap();
        let mut store = PreferenceStore::new();
        let mut out = pg_search(
            &d,
            &p,
            &mut oracle,
            &mut store,
            &params,
            Strategy::Random { prob: 0.5 },
            None,
        );
        out.stats.wall_ms = 0;
        (out.plan().cloned(), out.stats, elicited_text(&store))
    };
    assert_eq!(run(), run());
}

/// Records each query and declines it.
struct Recorder(Vec<Query>);

impl ExpertChannel for Recorder {
    fn kind(&self) -> pgplan_core::ChannelKind {
        pgplan_core::ChannelKind::Silent
    }

    fn answer(&mut self, query: &Query) -> ExpertResponse {
        self.0.push(query.clone());
        ExpertResponse::Decline
    }
}

#[test]
fn queries_are_posed_exactly_at_uncertain_nodes() {
    let (d, _) = scene();
    let params = SearchParams {
        trace: true,
        ..SearchParams::default()
    };
    for i in 1..=4 {
        let p = parse_problem(&fixture(&format!("blocksworld/bw-{i:02}.prob")), &d).unwrap();
        let mut rec = Recorder(Vec::new());
        let out = pg_search(
            &d,
            &p,
            &mut rec,
            &mut PreferenceStore::new(),
            &params,
            Strategy::Active,
            None,
        );
        assert!(!out.stats.trace.is_empty());
        for t in &out.stats.trace {
            assert_eq!(
                t.queried,
                t.pre_query_entropy > params.entropy_threshold,
                "node {}",
                t.node
            );
        }
        let queried = out.stats.trace.iter().filter(|t| t.queried).count();
        assert_eq!(queried, rec.0.len());
        assert_eq!(queried, out.stats.queries_issued);
        assert!(rec
            .0
            .iter()
            .all(|q| q.entropy > params.entropy_threshold && q.candidates.len() >= 2));
    }
}
