//! Strategy-comparison suites over fixture domains.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use pgplan_core::expert::elicited_text;
use pgplan_core::preference::{influence_percent, parse_preference_list};
use pgplan_core::{
    load_upfront, parse_domain, parse_problem, pg_search, Domain, ExpertChannel, FileError, Origin,
    ParseError, PreferenceStore, Problem, ScriptedOracle, SearchParams, SilentExpert, Strategy,
    UnsolvedReason, UpfrontExpert, UsageRecord,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{depth_profile, mean, ratios_to_max};
use crate::validate::validate_plan;

pub const DEFAULT_TIME_BUDGET_SECS: f64 = 30.0;
pub const REFERENCE_TIME_BUDGET_SECS: f64 = 600.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub name: String,
    pub domain: PathBuf,
    pub problems: Vec<PathBuf>,
    #[serde(default)]
    pub oracle: Option<PathBuf>,
    #[serde(default)]
    pub upfront: Option<PathBuf>,
}

fn default_strategies() -> Vec<String> {
    ["active", "upfront", "random", "none"]
        .map(String::from)
        .to_vec()
}

fn default_budget() -> f64 {
    DEFAULT_TIME_BUDGET_SECS
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_random_prob() -> f64 {
    pgplan_core::search::DEFAULT_RANDOM_QUERY_PROB
}

/// Suite description as read from JSON. Relative paths resolve against the
/// config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub name: String,
    pub domains: Vec<DomainEntry>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_budget")]
    pub time_budget_secs: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_random_prob")]
    pub random_query_prob: f64,
    /// Search parameter overrides; the time budget above wins over any
    /// budget given here.
    #[serde(default)]
    pub params: SearchParams,
    /// Query budgets for the active-strategy learning curve.
    #[serde(default)]
    pub learning_curve: Vec<usize>,
    /// Rerun each problem with the preferences its active run elicited,
    /// given upfront.
    #[serde(default)]
    pub replay: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    /// Keep preferences elicited on one problem for the domain's later
    /// problems (same strategy and seed).
    #[serde(default)]
    pub carry_prefs: bool,
}

fn default_parallel() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    File(#[from] FileError),
    #[error("invalid suite config: {0}")]
    Invalid(String),
}

pub struct LoadedDomain {
    pub name: String,
    pub domain: Domain,
    pub problems: Vec<Problem>,
    pub oracle: Option<ScriptedOracle>,
    pub upfront: PreferenceStore,
}

pub struct LoadedSuite {
    pub config: SuiteConfig,
    pub strategies: Vec<Strategy>,
    pub domains: Vec<LoadedDomain>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads a config file and every file it names; any problem is
    /// reported before a single run starts.
    pub fn load(path: impl AsRef<Path>) -> Result<LoadedSuite, ConfigError> {
        let path = path.as_ref();
        let text = read(path)?;
        let mut config: SuiteConfig =
            Self::from_json(&text).map_err(|source| ConfigError::Json {
                path: path.display().to_string(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        config.into_loaded()
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.domains {
            fix(&mut d.domain);
            d.problems.iter_mut().for_each(fix);
            d.oracle.iter_mut().for_each(fix);
            d.upfront.iter_mut().for_each(fix);
        }
        self.output_dir.iter_mut().for_each(fix);
    }

    pub fn into_loaded(self) -> Result<LoadedSuite, ConfigError> {
        if self.domains.iter().all(|d| d.problems.is_empty()) {
            return Err(ConfigError::Invalid(
                "at least one problem is required".into(),
            ));
        }
        if self.strategies.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one strategy is required".into(),
            ));
        }
        if self.time_budget_secs.is_nan() || self.time_budget_secs <= 0.0 {
            return Err(ConfigError::Invalid(
                "time_budget_secs must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.random_query_prob) {
            return Err(ConfigError::Invalid(
                "random_query_prob must lie in [0, 1]".into(),
            ));
        }
        if self.params.temperature.is_nan() || self.params.temperature <= 0.0 {
            return Err(ConfigError::Invalid("temperature must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("at least one seed is required".into()));
        }
        let strategies = self
            .strategies
            .iter()
            .map(|s| {
                s.parse::<Strategy>()
                    .map_err(ConfigError::Invalid)
                    .map(|st| match st {
                        Strategy::Random { .. } => Strategy::Random {
                            prob: self.random_query_prob,
                        },
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut domains = Vec::new();
        for entry in &self.domains {
            let dpath = entry.domain.display().to_string();
            let domain =
                parse_domain(&read(&entry.domain)?).map_err(|source| ConfigError::Parse {
                    path: dpath,
                    source,
                })?;
            let mut problems = Vec::new();
            for p in &entry.problems {
                let text = read(p)?;
                let prob = parse_problem(&text, &domain).map_err(|source| ConfigError::Parse {
                    path: p.display().to_string(),
                    source,
                })?;
                problems.push(prob);
            }
            let oracle = entry
                .oracle
                .as_ref()
                .map(|o| ScriptedOracle::load(o, &domain))
                .transpose()?;
            let upfront = match &entry.upfront {
                Some(u) => load_upfront(u, &domain)?,
                None => PreferenceStore::new(),
            };
            domains.push(LoadedDomain {
                name: entry.name.clone(),
                domain,
                problems,
                oracle,
                upfront,
            });
        }
        Ok(LoadedSuite {
            config: self,
            strategies,
            domains,
        })
    }
}

/// One (problem, strategy, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub domain: String,
    pub problem: String,
    pub strategy: String,
    pub seed: u64,
    pub solved: bool,
    pub reason: Option<UnsolvedReason>,
    pub plan_len: usize,
    pub queries: usize,
    pub prefs: usize,
    pub wall_ms: u64,
    pub nodes: u64,
    /// Independent validation verdict; `None` when no plan was returned.
    pub valid: Option<bool>,
    pub uses: usize,
    pub influenced: usize,
    pub plan: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    pub percent_solved: f64,
    /// Mean plan length over the runs every strategy solved.
    pub mean_plan_len: Option<f64>,
    /// `mean_plan_len` divided by the largest strategy mean.
    pub plan_len_ratio: Option<f64>,
    pub mean_queries: f64,
    pub influence_percent: Option<f64>,
    pub uses_per_run: f64,
    /// Cumulative preference use at depth ratios 0.1 .. 1.0.
    pub depth_profile: Option<Vec<f64>>,
    pub notice: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub query_budget: usize,
    pub mean_queries: f64,
    pub percent_solved: f64,
    pub mean_plan_len: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub active_influence_percent: Option<f64>,
    pub replay_influence_percent: Option<f64>,
    pub active_uses: usize,
    pub replay_uses: usize,
    pub replay_queries: usize,
    pub active_percent_solved: f64,
    pub replay_percent_solved: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub domain: String,
    pub problems: usize,
    pub commonly_solved: usize,
    pub strategies: Vec<StrategySummary>,
    pub learning_curve: Vec<CurvePoint>,
    pub replay: Option<ReplaySummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub budget_note: String,
    pub cells: Vec<CellResult>,
    pub domains: Vec<DomainSummary>,
    /// Per-strategy depth profile averaged over domains.
    pub suite_profiles: BTreeMap<String, Vec<f64>>,
}

impl SuiteReport {
    /// Copy with all wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> SuiteReport {
        let mut r = self.clone();
        for c in &mut r.cells {
            c.wall_ms = 0;
        }
        r
    }
}

struct CellRun {
    result: CellResult,
    usage: Vec<UsageRecord>,
    elicited: String,
    store: PreferenceStore,
}

fn expert_for(dom: &LoadedDomain, strategy: Strategy) -> Box<dyn ExpertChannel> {
    match (strategy, &dom.oracle) {
        (Strategy::Active | Strategy::Random { .. }, Some(o)) => Box::new(o.clone()),
        (Strategy::Upfront, _) => Box::new(UpfrontExpert),
        _ => Box::new(SilentExpert),
    }
}

fn run_cell(
    dom: &LoadedDomain,
    problem: &Problem,
    strategy: Strategy,
    seed: u64,
    params: &SearchParams,
    store: PreferenceStore,
) -> CellRun {
    let mut store = store;
    let mut expert = expert_for(dom, strategy);
    let params = SearchParams {
        rng_seed: seed,
        ..params.clone()
    };
    let out = pg_search(
        &dom.domain,
        problem,
        expert.as_mut(),
        &mut store,
        &params,
        strategy,
        None,
    );
    let plan = out.plan();
    let valid = plan.map(|p| validate_plan(&dom.domain, problem, p).is_ok());
    let usage = out.stats.usage.clone();
    CellRun {
        result: CellResult {
            domain: dom.name.clone(),
            problem: problem.name.to_string(),
            strategy: strategy.to_string(),
            seed,
            solved: out.stats.solved,
            reason: out.stats.reason,
            plan_len: out.stats.plan_len,
            queries: out.stats.queries_issued,
            prefs: out.stats.prefs_acquired,
            wall_ms: out.stats.wall_ms,
            nodes: out.stats.nodes_expanded,
            valid,
            uses: usage.len(),
            influenced: usage.iter().filter(|u| u.influenced).count(),
            plan: plan
                .map(|p| p.steps.iter().map(|s| s.to_string()).collect())
                .unwrap_or_default(),
        },
        usage,
        elicited: elicited_text(&store),
        store,
    }
}

fn initial_store(dom: &LoadedDomain, strategy: Strategy) -> PreferenceStore {
    match strategy {
        Strategy::Upfront => dom.upfront.clone(),
        _ => PreferenceStore::new(),
    }
}

fn par_map<T: Sync, R: Send>(
    parallel: bool,
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Runs every (problem, strategy, seed) cell with its own store and expert,
/// then the learning-curve and replay runs, and aggregates.
pub fn run_suite(suite: &LoadedSuite) -> SuiteReport {
    let cfg = &suite.config;
    let params = SearchParams {
        time_budget: Duration::from_secs_f64(cfg.time_budget_secs),
        ..cfg.params.clone()
    };
    let mut cells = Vec::new();
    let mut domains = Vec::new();
    let mut profiles: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();

    for dom in &suite.domains {
        let jobs: Vec<(usize, Strategy, u64)> = (0..dom.problems.len())
            .flat_map(|p| {
                suite
                    .strategies
                    .iter()
                    .flat_map(move |&s| cfg.seeds.iter().map(move |&seed| (p, s, seed)))
            })
            .collect();
        let runs = if cfg.carry_prefs {
            run_carried(suite, dom, &params)
        } else {
            par_map(cfg.parallel, &jobs, |&(p, s, seed)| {
                run_cell(
                    dom,
                    &dom.problems[p],
                    s,
                    seed,
                    &params,
                    initial_store(dom, s),
                )
            })
        };

        let solved_by_all = |p: &str, seed: u64| {
            runs.iter()
                .filter(|r| r.result.problem == p && r.result.seed == seed)
                .all(|r| r.result.solved)
        };
        let commonly_solved = dom
            .problems
            .iter()
            .flat_map(|p| cfg.seeds.iter().map(move |&s| (p.name.as_str(), s)))
            .filter(|&(p, s)| solved_by_all(p, s))
            .count();

        let mut summaries = Vec::new();
        for &s in &suite.strategies {
            let mine: Vec<&CellRun> = runs
                .iter()
                .filter(|r| r.result.strategy == s.name())
                .collect();
            let usage: Vec<UsageRecord> =
                mine.iter().flat_map(|r| r.usage.iter().cloned()).collect();
            let logs: Vec<Vec<UsageRecord>> = mine.iter().map(|r| r.usage.clone()).collect();
            let (depth_profile, notice) = match depth_profile(&logs) {
                Ok(p) => (Some(p), None),
                Err(e) => (None, Some(format!("depth profile omitted: {e}"))),
            };
            if let Some(p) = &depth_profile {
                profiles
                    .entry(s.name().to_string())
                    .or_default()
                    .push(p.clone());
            }
            summaries.push(StrategySummary {
                strategy: s.name().to_string(),
                runs: mine.len(),
                percent_solved: percent(
                    mine.iter().filter(|r| r.result.solved).count(),
                    mine.len(),
                ),
                mean_plan_len: mean(
                    mine.iter()
                        .filter(|r| solved_by_all(&r.result.problem, r.result.seed))
                        .map(|r| r.result.plan_len as f64),
                ),
                plan_len_ratio: None,
                mean_queries: mean(mine.iter().map(|r| r.result.queries as f64)).unwrap_or(0.0),
                influence_percent: influence_percent(&usage),
                uses_per_run: mean(mine.iter().map(|r| r.usage.len() as f64)).unwrap_or(0.0),
                depth_profile,
                notice,
            });
        }
        let means: Vec<f64> = summaries.iter().filter_map(|s| s.mean_plan_len).collect();
        if means.len() == summaries.len() {
            for (s, r) in summaries.iter_mut().zip(ratios_to_max(&means)) {
                s.plan_len_ratio = Some(r);
            }
        }

        let learning_curve = learning_curve(suite, dom, &params);
        let replay = cfg.replay.then(|| replay(suite, dom, &params));
        domains.push(DomainSummary {
            domain: dom.name.clone(),
            problems: dom.problems.len(),
            commonly_solved,
            strategies: summaries,
            learning_curve,
            replay,
        });
        cells.extend(runs.into_iter().map(|r| r.result));
    }

    let suite_profiles = profiles
        .into_iter()
        .map(|(k, curves)| {
            let n = curves.len() as f64;
            let avg = (0..curves[0].len())
                .map(|b| curves.iter().map(|c| c[b]).sum::<f64>() / n)
                .collect();
            (k, avg)
        })
        .collect();

    SuiteReport {
        name: cfg.name.clone(),
        budget_note: format!(
            "wall-clock budget {} s per problem (reference setup: {} s)",
            cfg.time_budget_secs, REFERENCE_TIME_BUDGET_SECS
        ),
        cells,
        domains,
        suite_profiles,
    }
}

/// Runs each (strategy, seed) sequence over the domain's problems in file
/// order, handing each run the store the previous one ended with.
fn run_carried(suite: &LoadedSuite, dom: &LoadedDomain, params: &SearchParams) -> Vec<CellRun> {
    let cfg = &suite.config;
    let groups: Vec<(Strategy, u64)> = suite
        .strategies
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let by_group = par_map(cfg.parallel, &groups, |&(s, seed)| {
        let mut store = initial_store(dom, s);
        let mut runs = Vec::new();
        for problem in &dom.problems {
            let run = run_cell(dom, problem, s, seed, params, store);
            store = run.store.clone();
            runs.push(run);
        }
        runs
    });
    // Same cell order as the uncarried path: problem, then strategy and seed.
    let mut iters: Vec<_> = by_group.into_iter().map(Vec::into_iter).collect();
    let mut out = Vec::new();
    for _ in &dom.problems {
        out.extend(iters.iter_mut().filter_map(Iterator::next));
    }
    out
}

fn learning_curve(
    suite: &LoadedSuite,
    dom: &LoadedDomain,
    params: &SearchParams,
) -> Vec<CurvePoint> {
    let cfg = &suite.config;
    let mut budgets = cfg.learning_curve.clone();
    budgets.sort_unstable();
    budgets.dedup();
    budgets
        .into_iter()
        .map(|b| {
            let jobs: Vec<(usize, u64)> = (0..dom.problems.len())
                .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
                .collect();
            let capped = SearchParams {
                max_queries: Some(b),
                ..params.clone()
            };
            let runs = par_map(cfg.parallel, &jobs, |&(p, seed)| {
                run_cell(
                    dom,
                    &dom.problems[p],
                    Strategy::Active,
                    seed,
                    &capped,
                    PreferenceStore::new(),
                )
                .result
            });
            CurvePoint {
                query_budget: b,
                mean_queries: mean(runs.iter().map(|r| r.queries as f64)).unwrap_or(0.0),
                percent_solved: percent(runs.iter().filter(|r| r.solved).count(), runs.len()),
                mean_plan_len: mean(runs.iter().filter(|r| r.solved).map(|r| r.plan_len as f64)),
            }
        })
        .collect()
}

/// Active run, then the same problem with that run's elicited log loaded
/// as upfront preferences.
fn replay(suite: &LoadedSuite, dom: &LoadedDomain, params: &SearchParams) -> ReplaySummary {
    let cfg = &suite.config;
    let jobs: Vec<(usize, u64)> = (0..dom.problems.len())
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let pairs = par_map(cfg.parallel, &jobs, |&(p, seed)| {
        let problem = &dom.problems[p];
        let active = run_cell(
            dom,
            problem,
            Strategy::Active,
            seed,
            params,
            PreferenceStore::new(),
        );
        let prefs =
            parse_preference_list(&active.elicited, &dom.domain).expect("elicited log reparses");
        let prefs = prefs
            .into_iter()
            .map(|p| pgplan_core::Preference {
                origin: Origin::Upfront,
                ..p
            })
            .collect();
        let store = PreferenceStore::from_prefs(prefs).expect("elicited ids are unique");
        let again = run_cell(dom, problem, Strategy::Upfront, seed, params, store);
        (active, again)
    });
    let active_usage: Vec<UsageRecord> = pairs
        .iter()
        .flat_map(|(a, _)| a.usage.iter().cloned())
        .collect();
    let replay_usage: Vec<UsageRecord> = pairs
        .iter()
        .flat_map(|(_, r)| r.usage.iter().cloned())
        .collect();
    ReplaySummary {
        active_influence_percent: influence_percent(&active_usage),
        replay_influence_percent: influence_percent(&replay_usage),
        active_uses: active_usage.len(),
        replay_uses: replay_usage.len(),
        replay_queries: pairs.iter().map(|(_, r)| r.result.queries).sum(),
        active_percent_solved: percent(
            pairs.iter().filter(|(a, _)| a.result.solved).count(),
            pairs.len(),
        ),
        replay_percent_solved: percent(
            pairs.iter().filter(|(_, r)| r.result.solved).count(),
            pairs.len(),
        ),
    }
}
