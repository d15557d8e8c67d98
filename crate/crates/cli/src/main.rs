use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pgplan_bench::{emit, kl_diagnostic, run_suite, Format, SuiteConfig};
use pgplan_core::expert::elicited_text;
use pgplan_core::preference::usage_to_jsonl;
use pgplan_core::{
    load_upfront, parse_domain, parse_problem, pg_search, Domain, ExpertChannel, PreferenceStore,
    Problem, ScriptedOracle, SearchParams, SilentExpert, Strategy, UpfrontExpert,
};
use pgplan_service::ServiceConfig;

const EXIT_SOLVED: u8 = 0;
const EXIT_UNSOLVED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pgplan",
    version,
    about = "HTN planning with entropy-gated preference elicitation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem.
    Solve(SolveArgs),
    /// Run a strategy-comparison suite described by a JSON config.
    Suite(SuiteArgs),
    /// Compare root method distributions against the exhaustive optimum.
    Kl(KlArgs),
    /// Serve interactive planning sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Active,
    Upfront,
    Random,
    None,
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long)]
    entropy_threshold: Option<f64>,
    #[arg(long)]
    rollout_depth: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Logarithm base for the entropy gate (e for nats, 2 for bits).
    #[arg(long)]
    entropy_base: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock budget in seconds, not counting time spent waiting on the expert.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_queries: Option<usize>,
    /// Sample the method exploration order from the policy.
    #[arg(long)]
    sample_methods: bool,
}

impl SearchFlags {
    fn params(&self) -> Result<SearchParams> {
        let mut p = SearchParams::default();
        if let Some(v) = self.entropy_threshold {
            p.entropy_threshold = v;
        }
        if let Some(v) = self.rollout_depth {
            p.rollout_depth = v;
        }
        if let Some(v) = self.temperature {
            if !(v > 0.0 && v.is_finite()) {
                bail!("--temperature must be positive");
            }
            p.temperature = v;
        }
        if let Some(v) = self.entropy_base {
            if !(v > 1.0 && v.is_finite()) {
                bail!("--entropy-base must exceed 1");
            }
            p.entropy_base = v;
        }
        if let Some(v) = self.seed {
            p.rng_seed = v;
        }
        if let Some(v) = self.time_limit {
            p.time_budget = Duration::try_from_secs_f64(v).context("--time-limit")?;
        }
        p.max_queries = self.max_queries;
        p.sample_methods = self.sample_methods;
        Ok(p)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_enum, default_value = "active")]
    strategy: StrategyArg,
    /// Scripted oracle answering queries.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Preferences loaded before search starts.
    #[arg(long)]
    prefs: Option<PathBuf>,
    #[arg(long, default_value_t = pgplan_core::search::DEFAULT_RANDOM_QUERY_PROB)]
    random_query_prob: f64,
    /// Probability that an oracle answer has its prefer/avoid sets swapped.
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    #[command(flatten)]
    search: SearchFlags,
    /// Record one line per evaluated node.
    #[arg(long)]
    trace: bool,
    /// Directory for stats.json, plan.txt, usage.jsonl, elicited.prefs and trace.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Carry elicited preferences across problems within a domain.
    #[arg(long)]
    carry_prefs: bool,
}

#[derive(Args)]
struct KlArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    prefs: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Hide method scores, probabilities and entropies from the expert.
    #[arg(long)]
    blind_console: bool,
    /// Seconds to wait for an answer before treating a query as declined.
    #[arg(long, default_value_t = 120.0)]
    expert_timeout: f64,
}

/// Failures that happen before any search starts.
#[derive(Debug)]
struct ConfigFailure(anyhow::Error);

fn config<T>(r: Result<T>) -> Result<T, ConfigFailure> {
    r.map_err(ConfigFailure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Suite(a) => suite(a),
        Command::Kl(a) => kl(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(ConfigFailure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_inputs(domain: &Path, problem: &Path) -> Result<(Domain, Problem)> {
    let dtext =
        fs::read_to_string(domain).with_context(|| format!("reading {}", domain.display()))?;
    let d = parse_domain(&dtext).with_context(|| domain.display().to_string())?;
    let ptext =
        fs::read_to_string(problem).with_context(|| format!("reading {}", problem.display()))?;
    let p = parse_problem(&ptext, &d).with_context(|| problem.display().to_string())?;
    Ok((d, p))
}

fn load_store(prefs: Option<&Path>, domain: &Domain) -> Result<PreferenceStore> {
    match prefs {
        Some(path) => Ok(load_upfront(path, domain)?),
        None => Ok(PreferenceStore::new()),
    }
}

fn solve(args: SolveArgs) -> Result<Result<u8>, ConfigFailure> {
    let (domain, problem) = config(load_inputs(&args.domain, &args.problem))?;
    let mut params = config(args.search.params())?;
    params.trace = args.trace;
    if !(0.0..=1.0).contains(&args.random_query_prob) {
        return Err(ConfigFailure(anyhow::anyhow!(
            "--random-query-prob must lie in [0, 1]"
        )));
    }
    let strategy = match args.strategy {
        StrategyArg::Active => Strategy::Active,
        StrategyArg::Upfront => Strategy::Upfront,
        StrategyArg::Random => Strategy::Random {
            prob: args.random_query_prob,
        },
        StrategyArg::None => Strategy::None,
    };
    let mut store = config(load_store(args.prefs.as_deref(), &domain))?;
    let mut expert: Box<dyn ExpertChannel> = match (&args.oracle, strategy) {
        (_, Strategy::Upfront) => Box::new(UpfrontExpert),
        (Some(path), Strategy::Active | Strategy::Random { .. }) => Box::new(
            config(ScriptedOracle::load(path, &domain).map_err(Into::into))?
                .with_flip_prob(args.flip_prob, params.rng_seed),
        ),
        _ => Box::new(SilentExpert),
    };
    let upfront_ids: Vec<String> = store.prefs().iter().map(|p| p.id.to_string()).collect();

    let outcome = pg_search(
        &domain,
        &problem,
        expert.as_mut(),
        &mut store,
        &params,
        strategy,
        None,
    );
    Ok(report_solve(
        &outcome,
        &store,
        &upfront_ids,
        args.out.as_deref(),
    ))
}

fn report_solve(
    outcome: &pgplan_core::SearchOutcome,
    store: &PreferenceStore,
    upfront_ids: &[String],
    out: Option<&Path>,
) -> Result<u8> {
    let stats = &outcome.stats;
    match &outcome.result {
        Ok(sol) => {
            for step in &sol.plan.steps {
                println!("{step}");
            }
        }
        Err(reason) => eprintln!("unsolved: {reason}"),
    }
    eprintln!(
        "{} {}: solved={} plan_len={} queries={} prefs={} nodes={} wall_ms={}",
        stats.problem,
        stats.strategy,
        stats.solved,
        stats.plan_len,
        stats.queries_issued,
        stats.prefs_acquired,
        stats.nodes_expanded,
        stats.wall_ms
    );
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut light = stats.clone();
        light.trace.clear();
        fs::write(
            dir.join("stats.json"),
            serde_json::to_string_pretty(&light)? + "\n",
        )?;
        let plan = outcome
            .plan()
            .map(|p| p.steps.iter().map(|s| format!("{s}\n")).collect::<String>())
            .unwrap_or_default();
        fs::write(dir.join("plan.txt"), plan)?;
        fs::write(dir.join("usage.jsonl"), usage_to_jsonl(&stats.usage))?;
        let elicited = PreferenceStore::from_prefs(
            store
                .prefs()
                .iter()
                .filter(|p| !upfront_ids.iter().any(|id| id == p.id.as_str()))
                .cloned()
                .collect(),
        )?;
        fs::write(dir.join("elicited.prefs"), elicited_text(&elicited))?;
        if !stats.trace.is_empty() {
            let lines: String = stats
                .trace
                .iter()
                .map(|t| serde_json::to_string(t).map(|s| s + "\n"))
                .collect::<Result<_, _>>()?;
            fs::write(dir.join("trace.jsonl"), lines)?;
        }
    }
    Ok(if stats.solved {
        EXIT_SOLVED
    } else {
        EXIT_UNSOLVED
    })
}

fn suite(args: SuiteArgs) -> Result<Result<u8>, ConfigFailure> {
    let mut loaded = config(SuiteConfig::load(&args.config).map_err(Into::into))?;
    if let Some(out) = args.out {
        loaded.config.output_dir = Some(out);
    }
    if args.carry_prefs {
        loaded.config.carry_prefs = true;
    }
    let report = run_suite(&loaded);
    Ok((|| {
        for d in &report.domains {
            println!(
                "{} ({} problems, {} solved by all)",
                d.domain, d.problems, d.commonly_solved
            );
            for s in &d.strategies {
                println!(
                    "  {:<8} solved {:>6.2}%  len-ratio {:>6}  queries {:>6.2}  influence {:>6}  uses/run {:>6.2}",
                    s.strategy,
                    s.percent_solved,
                    s.plan_len_ratio.map_or("n/a".into(), |r| format!("{r:.3}")),
                    s.mean_queries,
                    s.influence_percent.map_or("n/a".into(), |r| format!("{r:.1}%")),
                    s.uses_per_run
                );
            }
        }
        if let Some(dir) = &loaded.config.output_dir {
            for path in emit(&report, &[Format::Json, Format::Csv], dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Ok(EXIT_SOLVED)
    })())
}

fn kl(args: KlArgs) -> Result<Result<u8>, ConfigFailure> {
    let (domain, problem) = config(load_inputs(&args.domain, &args.problem))?;
    let params = config(args.search.params())?;
    let store = config(load_store(args.prefs.as_deref(), &domain))?;
    let report = config(kl_diagnostic(&domain, &problem, &store, &params).map_err(Into::into))?;
    Ok(serde_json::to_string_pretty(&report)
        .map(|s| {
            println!("{s}");
            EXIT_SOLVED
        })
        .map_err(Into::into))
}

fn serve(args: ServeArgs) -> Result<Result<u8>, ConfigFailure> {
    let expert_timeout =
        config(Duration::try_from_secs_f64(args.expert_timeout).context("--expert-timeout"))?;
    let cfg = ServiceConfig {
        blind_console: args.blind_console,
        expert_timeout,
    };
    let runtime = config(tokio::runtime::Runtime::new().context("starting runtime"))?;
    Ok(runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        pgplan_service::serve(listener, cfg).await?;
        Ok(EXIT_SOLVED)
    }))
}
