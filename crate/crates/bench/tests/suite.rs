use std::path::{Path, PathBuf};

use pgplan_bench::suite::ConfigError;
use pgplan_bench::{
    explore, kl_diagnostic, run_suite, validate_plan, SuiteConfig, ValidationError,
};
use pgplan_core::{
    parse_domain, parse_problem, parse_task, pg_search, Plan, PlanStep, PreferenceStore,
    SearchParams, SilentExpert, Strategy,
};
use serde_json::json;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap()
}

fn small_config(extra: serde_json::Value) -> SuiteConfig {
    let mut v = json!({
        "name": "small",
        "time_budget_secs": 30,
        "seeds": [0],
        "strategies": ["active", "upfront", "none"],
        "learning_curve": [0, 1, 2],
        "replay": true,
        "domains": [{
            "name": "blocksworld",
            "domain": "blocksworld/domain.dom",
            "problems": ["blocksworld/fig1.prob", "blocksworld/bw-01.prob", "blocksworld/bw-02.prob"],
            "oracle": "blocksworld/oracle.orc",
            "upfront": "blocksworld/upfront.prefs"
        }]
    });
    if let (serde_json::Value::Object(a), serde_json::Value::Object(b)) = (&mut v, extra) {
        a.extend(b);
    }
    let mut cfg = SuiteConfig::from_json(&v.to_string()).unwrap();
    cfg.resolve(&fixtures());
    cfg
}

fn plan_of(lines: &[&str], domain: &pgplan_core::Domain) -> Plan {
    Plan {
        steps: lines
            .iter()
            .map(|l| PlanStep::from_task(&parse_task(l, domain).unwrap()).unwrap())
            .collect(),
    }
}

#[test]
fn validator_rejects_broken_plans() {
    let d = parse_domain(&read("kl/detour-6-8.dom")).unwrap();
    let p = parse_problem(&read("kl/detour-6-8.prob"), &d).unwrap();
    let north = [
        "Start", "North1", "North2", "North3", "North4", "North5", "Home",
    ];
    let steps: Vec<String> = north
        .windows(2)
        .map(|w| format!("(step {} {})", w[0], w[1]))
        .collect();
    let refs: Vec<&str> = steps.iter().map(String::as_str).collect();
    assert_eq!(validate_plan(&d, &p, &plan_of(&refs, &d)), Ok(()));

    let skipped: Vec<&str> = refs
        .iter()
        .copied()
        .filter(|s| !s.contains("North2 North3"))
        .collect();
    assert!(matches!(
        validate_plan(&d, &p, &plan_of(&skipped, &d)),
        Err(ValidationError::Precondition { step: 2, .. })
    ));
    assert!(matches!(
        validate_plan(&d, &p, &plan_of(&refs[..3], &d)),
        Err(ValidationError::GoalUnmet(_))
    ));
}

#[test]
fn search_and_enumeration_agree_on_detours() {
    for name in ["detour-6-8", "detour-5-9", "detour-6-8-10"] {
        let d = parse_domain(&read(&format!("kl/{name}.dom"))).unwrap();
        let p = parse_problem(&read(&format!("kl/{name}.prob")), &d).unwrap();
        let truth = explore(&d, &p, 10_000).unwrap();
        let out = pg_search(
            &d,
            &p,
            &mut SilentExpert,
            &mut PreferenceStore::new(),
            &SearchParams::default(),
            Strategy::None,
            None,
        );
        assert!(out.stats.solved);
        assert!(out.stats.plan_len >= truth.shortest.unwrap());
        validate_plan(&d, &p, out.plan().unwrap()).unwrap();
    }
}

#[test]
fn shortest_detour_matches_the_shorter_route() {
    let d = parse_domain(&read("kl/detour-6-8.dom")).unwrap();
    let p = parse_problem(&read("kl/detour-6-8.prob"), &d).unwrap();
    // North has five waypoints, so six steps reach Home.
    assert_eq!(explore(&d, &p, 10_000).unwrap().shortest, Some(6));
    let report = kl_diagnostic(&d, &p, &PreferenceStore::new(), &SearchParams::default()).unwrap();
    assert_eq!(report.optimal_len, [Some(6), Some(8)]);
    let e2 = (-2f64).exp();
    assert!((report.optimal[0] - 1.0 / (1.0 + e2)).abs() < 1e-12);
}

#[test]
fn config_errors_are_reported_before_running() {
    let bad = SuiteConfig::from_json(
        &json!({ "name": "x", "strategies": ["none"], "domains": [{ "name": "d", "domain": "nope.dom", "problems": ["p"] }] })
            .to_string(),
    )
    .unwrap();
    assert!(matches!(bad.into_loaded(), Err(ConfigError::Io { .. })));
    let unknown = small_config(json!({ "strategies": ["sideways"] }));
    assert!(matches!(
        unknown.into_loaded(),
        Err(ConfigError::Invalid(_))
    ));
    let no_seeds = small_config(json!({ "seeds": [] }));
    assert!(matches!(
        no_seeds.into_loaded(),
        Err(ConfigError::Invalid(_))
    ));
    assert!(matches!(
        SuiteConfig::load(fixtures().join("missing.json")),
        Err(ConfigError::Io { .. })
    ));
}

#[test]
fn small_suite_reports_every_cell() {
    let report = run_suite(&small_config(json!({})).into_loaded().unwrap());
    assert_eq!(report.cells.len(), 3 * 3);
    assert!(report
        .cells
        .iter()
        .filter(|c| c.solved)
        .all(|c| c.valid == Some(true)));
    let dom = &report.domains[0];
    assert_eq!(dom.problems, 3);
    assert_eq!(
        dom.strategies
            .iter()
            .map(|s| s.strategy.as_str())
            .collect::<Vec<_>>(),
        ["active", "upfront", "none"]
    );
    for s in &dom.strategies {
        if let Some(r) = s.plan_len_ratio {
            assert!(r > 0.0 && r <= 1.0 + 1e-12);
        }
    }
    let none = dom
        .strategies
        .iter()
        .find(|s| s.strategy == "none")
        .unwrap();
    assert_eq!(none.mean_queries, 0.0);
    assert_eq!(none.influence_percent, None);

    // Query budgets cap the mean query count.
    for point in &dom.learning_curve {
        assert!(point.mean_queries <= point.query_budget as f64 + 1e-12);
    }
    let replay = dom.replay.as_ref().unwrap();
    assert_eq!(replay.replay_queries, 0);
}

#[test]
fn carried_preferences_never_cost_more_queries() {
    let fresh = run_suite(
        &small_config(json!({ "strategies": ["active"] }))
            .into_loaded()
            .unwrap(),
    );
    let carried = run_suite(
        &small_config(json!({ "strategies": ["active"], "carry_prefs": true }))
            .into_loaded()
            .unwrap(),
    );
    let queries = |r: &pgplan_bench::SuiteReport| r.cells.iter().map(|c| c.queries).sum::<usize>();
    assert!(queries(&carried) <= queries(&fresh));
    // The first problem starts empty either way.
    assert_eq!(carried.cells[0].queries, fresh.cells[0].queries);
    assert!(carried
        .cells
        .iter()
        .filter(|c| c.solved)
        .all(|c| c.valid == Some(true)));
}
