//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pgplan_bench::micro::{reach_problems, REACH_DOMAIN};
use pgplan_bench::suite::{DomainSummary, StrategySummary};
use pgplan_bench::{
    explore, kl_diagnostic, profile_at, run_suite, to_json, validate_plan, SuiteConfig, SuiteReport,
};
use pgplan_core::{
    boltzmann, entropy, load_upfront, parse_domain, parse_problem, pg_search, Domain, NodeTrace,
    PreferenceStore, Problem, ScriptedOracle, SearchParams, SilentExpert, Strategy, UnsolvedReason,
};

const THRESHOLD: f64 = 0.5;

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Fixture {
    name: String,
    domain: Domain,
    problems: Vec<Problem>,
    oracle: ScriptedOracle,
}

fn load_fixtures() -> Vec<Fixture> {
    ["blocksworld", "hanoi", "rockets"]
        .iter()
        .map(|name| {
            let dir = fixtures().join(name);
            let domain =
                parse_domain(&std::fs::read_to_string(dir.join("domain.dom")).unwrap()).unwrap();
            let mut paths: Vec<_> = std::fs::read_dir(&dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "prob"))
                .collect();
            paths.sort();
            let problems = paths
                .iter()
                .map(|p| parse_problem(&std::fs::read_to_string(p).unwrap(), &domain).unwrap())
                .collect();
            let oracle = ScriptedOracle::load(dir.join("oracle.orc"), &domain).unwrap();
            Fixture {
                name: name.to_string(),
                domain,
                problems,
                oracle,
            }
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn entropy_softmax() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 1..=4usize {
        for base in [-3.0, 0.0, 0.7, 12.5] {
            let p = boltzmann(&vec![base; k], 1.0).unwrap();
            if !p.iter().all(|x| close(*x, 1.0 / k as f64, 1e-9)) {
                failures.push(format!("uniform k={k}"));
            }
            if !close(entropy(&p).unwrap(), (k as f64).ln(), 1e-9) {
                failures.push(format!("entropy k={k}"));
            }
        }
    }
    // e^1.5 / (e^1.5 + e^0.5) = e / (e + 1).
    let e = std::f64::consts::E;
    let p = boltzmann(&[1.5, 0.5], 1.0).unwrap();
    if !close(p[0], e / (e + 1.0), 1e-9) || !close(p[1], 1.0 / (e + 1.0), 1e-9) {
        failures.push(format!("two scores gave {p:?}"));
    }
    if !close(p[0], 0.7311, 5e-5) || !close(p[1], 0.2689, 5e-5) {
        failures.push("two scores off the rounded values".into());
    }
    let scores = [0.3, -1.2, 2.5, 0.0];
    let base = boltzmann(&scores, 1.0).unwrap();
    for shift in [-100.0, -1.0, 1e-3, 7.0, 250.0] {
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let q = boltzmann(&shifted, 1.0).unwrap();
        if !base.iter().zip(&q).all(|(a, b)| close(*a, *b, 1e-9)) {
            failures.push(format!("shift {shift}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("took {elapsed:?}"));
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{elapsed:?}")
        } else {
            failures.join("; ")
        },
    )
}

fn traced(params: &SearchParams) -> SearchParams {
    SearchParams {
        trace: true,
        ..params.clone()
    }
}

fn query_gate(bw: &Fixture, params: &SearchParams) -> Outcome {
    let params = traced(params);
    let (mut nodes, mut queried, mut wrong) = (0, 0, 0);
    for p in &bw.problems {
        let mut oracle = bw.oracle.clone();
        let out = pg_search(
            &bw.domain,
            p,
            &mut oracle,
            &mut PreferenceStore::new(),
            &params,
            Strategy::Active,
            None,
        );
        for t in &out.stats.trace {
            nodes += 1;
            queried += usize::from(t.queried);
            if t.queried != (t.pre_query_entropy > THRESHOLD) {
                wrong += 1;
            }
        }
        let in_trace = out.stats.trace.iter().filter(|t| t.queried).count();
        if in_trace != out.stats.queries_issued {
            wrong += 1;
        }
    }
    outcome(
        wrong == 0 && queried > 0,
        format!("{nodes} nodes, {queried} queried, {wrong} mismatches"),
    )
}

fn plan_validity(fx: &[Fixture], report: &SuiteReport) -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for c in report.cells.iter().filter(|c| c.solved) {
        checked += 1;
        let f = fx.iter().find(|f| f.name == c.domain).unwrap();
        let problem = f
            .problems
            .iter()
            .find(|p| p.name.as_str() == c.problem)
            .unwrap();
        let text = c.plan.join("\n");
        let plan = pgplan_core::Plan {
            steps: text
                .lines()
                .map(|l| {
                    pgplan_core::PlanStep::from_task(
                        &pgplan_core::parse_task(l, &f.domain).unwrap(),
                    )
                    .unwrap()
                })
                .collect(),
        };
        if validate_plan(&f.domain, problem, &plan).is_err() || c.valid != Some(true) {
            bad.push(format!("{}/{}", c.problem, c.strategy));
        }
    }
    outcome(
        bad.is_empty() && checked > 0,
        format!("{checked} plans checked, {} invalid {bad:?}", bad.len()),
    )
}

fn completeness() -> Outcome {
    let start = Instant::now();
    let domain = parse_domain(REACH_DOMAIN).unwrap();
    let params = SearchParams {
        time_budget: Duration::from_secs(10),
        ..SearchParams::default()
    };
    let (mut solvable, mut unsolvable, mut wrong) = (0, 0, Vec::new());
    let mut seed = 0;
    while solvable < 20 || unsolvable < 5 {
        for mp in reach_problems(seed, 40) {
            let problem = parse_problem(&mp.text, &domain).unwrap();
            let truth = match explore(&domain, &problem, 10_000) {
                Ok(x) => x,
                Err(_) => continue,
            };
            let out = pg_search(
                &domain,
                &problem,
                &mut SilentExpert,
                &mut PreferenceStore::new(),
                &params,
                Strategy::None,
                None,
            );
            match truth.shortest {
                Some(_) => {
                    solvable += 1;
                    if !out.stats.solved {
                        wrong.push(mp.name);
                    }
                }
                None => {
                    unsolvable += 1;
                    if out.result.as_ref().err() != Some(&UnsolvedReason::Exhausted) {
                        wrong.push(mp.name);
                    }
                }
            }
        }
        seed += 1;
    }
    let elapsed = start.elapsed();
    let pass = wrong.is_empty() && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{solvable} solvable, {unsolvable} unsolvable, {} disagreements, {elapsed:?}",
            wrong.len()
        ),
    )
}

fn strategy<'a>(d: &'a DomainSummary, name: &str) -> &'a StrategySummary {
    d.strategies.iter().find(|s| s.strategy == name).unwrap()
}

fn directional(report: &SuiteReport, elapsed: Duration) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = elapsed < Duration::from_secs(30 * 60);
    let mut random_wins = 0;
    for d in &report.domains {
        pass &= d.problems >= 10;
        let active = strategy(d, "active");
        for base in ["upfront", "random", "none"] {
            let b = strategy(d, base);
            if active.percent_solved < b.percent_solved {
                pass = false;
                notes.push(format!("{}: solved below {base}", d.domain));
            }
            if let (Some(a), Some(l)) = (active.mean_plan_len, b.mean_plan_len) {
                if a > l + 1e-9 {
                    pass = false;
                    notes.push(format!(
                        "{}: longer than {base} ({a:.2} > {l:.2})",
                        d.domain
                    ));
                }
            }
        }
        if strategy(d, "random").percent_solved >= strategy(d, "none").percent_solved {
            random_wins += 1;
        }
        notes.push(format!(
            "{} solved {:.0}% len {:.2} vs best baseline len {:.2}",
            d.domain,
            active.percent_solved,
            active.mean_plan_len.unwrap_or(f64::NAN),
            ["upfront", "random", "none"]
                .iter()
                .filter_map(|b| strategy(d, b).mean_plan_len)
                .fold(f64::INFINITY, f64::min)
        ));
    }
    pass &= random_wins >= 2;
    notes.push(format!("random >= none in {random_wins}/3, {elapsed:?}"));
    outcome(pass, notes.join("; "))
}

fn influence(report: &SuiteReport) -> Outcome {
    let mut wins = 0;
    let (mut active_uses, mut replay_uses) = (0, 0);
    let (mut active_per_run, mut upfront_per_run) = (0.0, 0.0);
    let mut notes = Vec::new();
    for d in &report.domains {
        let r = d.replay.as_ref().expect("replay enabled");
        let (a, u) = (
            r.active_influence_percent.unwrap_or(0.0),
            r.replay_influence_percent.unwrap_or(0.0),
        );
        if a > u {
            wins += 1;
        }
        active_uses += r.active_uses;
        replay_uses += r.replay_uses;
        active_per_run += strategy(d, "active").uses_per_run;
        upfront_per_run += strategy(d, "upfront").uses_per_run;
        notes.push(format!("{} {a:.1}% vs {u:.1}%", d.domain));
    }
    let n = report.domains.len() as f64;
    let (active_per_run, upfront_per_run) = (active_per_run / n, upfront_per_run / n);
    notes.push(format!("influence wins {wins}/3"));
    notes.push(format!(
        "uses: active {active_uses} vs upfront-from-log {replay_uses}"
    ));
    notes.push(format!(
        "per run: active {active_per_run:.2} vs upfront {upfront_per_run:.2}"
    ));
    let pass = wins >= 2 && active_uses > replay_uses && active_per_run > upfront_per_run;
    outcome(pass, notes.join("; "))
}

fn depth_profile(report: &SuiteReport) -> Outcome {
    let at = |s: &str| report.suite_profiles.get(s).map(|p| profile_at(p, 0.6));
    match (at("active"), at("upfront")) {
        (Some(a), Some(u)) => outcome(a > u, format!("active {a:.3} vs upfront {u:.3} at 0.6")),
        _ => outcome(false, "missing profile"),
    }
}

/// Relative entropy computed from scratch, with the same smoothing of `q`.
fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    let eps = 1e-9;
    let k = q.len() as f64;
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a * (1.0 + k * eps) / (b + eps)).ln())
        .sum()
}

fn kl(params: &SearchParams) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for name in ["detour-6-8", "detour-5-9", "detour-6-8-10"] {
        let dir = fixtures().join("kl");
        let domain =
            parse_domain(&std::fs::read_to_string(dir.join(format!("{name}.dom"))).unwrap())
                .unwrap();
        let problem = parse_problem(
            &std::fs::read_to_string(dir.join(format!("{name}.prob"))).unwrap(),
            &domain,
        )
        .unwrap();
        let aligned = load_upfront(dir.join(format!("{name}.prefs")), &domain).unwrap();
        let empty = kl_diagnostic(&domain, &problem, &PreferenceStore::new(), params).unwrap();
        let guided = kl_diagnostic(&domain, &problem, &aligned, params).unwrap();
        for r in [&empty, &guided] {
            for q in [&r.rollout, &r.guided] {
                let d = relative_entropy(&r.optimal, q);
                if d < -1e-12 {
                    pass = false;
                    notes.push(format!("{name}: negative divergence {d}"));
                }
            }
            if !close(relative_entropy(&r.optimal, &r.rollout), r.d_rollout, 1e-9) {
                pass = false;
                notes.push(format!("{name}: divergence disagrees with recomputation"));
            }
        }
        if empty.difference.abs() >= 1e-9 {
            pass = false;
        }
        if guided.difference < 0.0 {
            pass = false;
        }
        notes.push(format!(
            "{name} empty {:.1e} aligned {:.3}",
            empty.difference, guided.difference
        ));
    }
    outcome(pass, notes.join("; "))
}

fn replay(config_path: &Path, first: &SuiteReport) -> Outcome {
    let second = run_suite(&SuiteConfig::load(config_path).unwrap());
    let same = to_json(&first.without_timing()) == to_json(&second.without_timing());
    let queries: usize = first
        .domains
        .iter()
        .filter_map(|d| d.replay.as_ref())
        .map(|r| r.replay_queries)
        .sum();
    let solved = first
        .domains
        .iter()
        .filter_map(|d| d.replay.as_ref())
        .all(|r| r.replay_percent_solved >= r.active_percent_solved);
    outcome(
        same && queries == 0 && solved,
        format!("reports identical: {same}; replay queries {queries}"),
    )
}

/// A trace without the fields that record whether the expert was asked.
fn decisions(trace: &[NodeTrace]) -> Vec<NodeTrace> {
    trace
        .iter()
        .map(|t| NodeTrace {
            queried: false,
            answered: false,
            ..t.clone()
        })
        .collect()
}

fn silent_equivalence(fx: &[Fixture], params: &SearchParams) -> Outcome {
    let params = traced(params);
    let (mut runs, mut differ) = (0, Vec::new());
    for f in fx {
        for p in &f.problems {
            let run = |s| {
                pg_search(
                    &f.domain,
                    p,
                    &mut SilentExpert,
                    &mut PreferenceStore::new(),
                    &params,
                    s,
                    None,
                )
            };
            let (a, n) = (run(Strategy::Active), run(Strategy::None));
            runs += 1;
            if a.plan() != n.plan() || decisions(&a.stats.trace) != decisions(&n.stats.trace) {
                differ.push(p.name.to_string());
            }
        }
    }
    outcome(
        differ.is_empty(),
        format!("{runs} problems, {} differ {differ:?}", differ.len()),
    )
}

fn main() -> ExitCode {
    let config_path = fixtures().join("suite.json");
    let loaded = SuiteConfig::load(&config_path).expect("suite config loads");
    let params = loaded.config.params.clone();
    let fx = load_fixtures();
    let start = Instant::now();
    let report = run_suite(&loaded);
    let suite_time = start.elapsed();

    let mut results: BTreeMap<usize, (&str, Outcome)> = BTreeMap::new();
    let mut add = |name, o| {
        let n = results.len();
        results.insert(n, (name, o));
    };
    add("entropy and softmax values", entropy_softmax());
    add("query gate soundness", query_gate(&fx[0], &params));
    add("plan validity", plan_validity(&fx, &report));
    add("brute-force completeness", completeness());
    add(
        "solved rate and plan length direction",
        directional(&report, suite_time),
    );
    add("preference influence and usage gap", influence(&report));
    add("depth profile at 0.6", depth_profile(&report));
    add("KL diagnostic", kl(&params));
    add("replay determinism", replay(&config_path, &report));
    add(
        "silent channel equivalence",
        silent_equivalence(&fx, &params),
    );

    let mut failed = 0;
    for (name, o) in results.values() {
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
