//! `mamoc` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mamoc::engine::objective::{Objective, ObjectiveKind};
use mamoc::engine::{analyze, pareto, AnalysisOptions, QueryOutcome, SchedulerDescription, Verdict};
use mamoc::ingest::{generate_benchmark, parse_model, parse_query, serialize_model, BenchmarkParams, QuerySpec};
use mamoc::model::{MarkovAutomaton, RewardFunction};
use mamoc::montecarlo::{estimate, EstimateOptions, PathEvent, SimScheduler, ThresholdScheduler};

mod output;

use output::{approx_json, error_code, under_csv};

#[derive(Parser)]
#[command(name = "mamoc", version, about = "Multi-objective model checking of Markov automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any query: achievability, numerical or Pareto.
    Check(AnalysisArgs),
    /// Approximate the Pareto front of the query's objectives.
    Pareto(AnalysisArgs),
    /// Estimate the query's objectives by simulation under a witness or given scheduler.
    Simulate(SimulateArgs),
    /// Write a benchmark model.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Model file.
    model: PathBuf,
    /// Inline query text.
    #[arg(short, long, conflicts_with = "query_file", required_unless_present = "query_file")]
    query: Option<String>,
    /// File holding the query text.
    #[arg(long)]
    query_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Result file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Omit wall-clock timings so identical runs give identical output.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct AnalysisArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-3)]
    eta: f64,
    /// Digitization constant; chosen from the precision when absent.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "vi-epsilon", default_value_t = 1e-6)]
    vi_epsilon: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Scheduler JSON: a threshold scheduler, a scheduler description, or a `check` result.
    #[arg(long)]
    scheduler: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Jobs,
    Polling,
    Stream,
    Mutex,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    /// Processors (jobs) or queue capacity (polling).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Model file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Successful run: text to emit and exit code.
struct Report {
    text: String,
    code: u8,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let err = json!({ "error": error_code(&e), "message": format!("{e:#}") });
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check(a) => emit(&a.common, check(&a, false)?),
        Command::Pareto(a) => emit(&a.common, check(&a, true)?),
        Command::Simulate(a) => emit(&a.analysis.common, simulate(&a)?),
        Command::Generate(a) => generate(&a),
    }
}

fn emit(common: &Common, report: Report) -> Result<u8> {
    match &common.output {
        Some(p) => std::fs::write(p, &report.text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", report.text),
    }
    Ok(report.code)
}

fn set_workers(workers: Option<usize>) -> Result<()> {
    if let Some(w) = workers {
        if w == 0 {
            bail!(Usage("--workers must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    Ok(())
}

/// Invalid command-line input.
#[derive(Debug)]
pub struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn load(common: &Common) -> Result<(MarkovAutomaton, QuerySpec, String)> {
    let text = std::fs::read_to_string(&common.model).with_context(|| format!("reading {}", common.model.display()))?;
    let ma = parse_model(&text).with_context(|| format!("parsing {}", common.model.display()))?;
    let query = match (&common.query, &common.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => bail!(Usage("a query is required".into())),
    };
    let query = query.trim().to_string();
    let spec = parse_query(&query, &ma)?;
    Ok((ma, spec, query))
}

fn options(a: &AnalysisArgs) -> Result<AnalysisOptions> {
    if !(a.eta > 0.0 && a.eta.is_finite()) {
        bail!(Usage(format!("--eta must be positive, got {}", a.eta)));
    }
    if !(a.vi_epsilon > 0.0 && a.vi_epsilon.is_finite()) {
        bail!(Usage(format!("--vi-epsilon must be positive, got {}", a.vi_epsilon)));
    }
    Ok(AnalysisOptions { eta: a.eta, vi_eps: a.vi_epsilon, delta: a.delta, ..AnalysisOptions::default() })
}

fn elapsed(common: &Common, start: Instant) -> Value {
    if common.deterministic {
        Value::Null
    } else {
        json!(start.elapsed().as_secs_f64() * 1e3)
    }
}

fn check(a: &AnalysisArgs, pareto_only: bool) -> Result<Report> {
    set_workers(a.common.workers)?;
    let opts = options(a)?;
    let (ma, spec, query) = load(&a.common)?;
    let start = Instant::now();
    let outcome = if pareto_only {
        QueryOutcome::Pareto(pareto(&ma, &spec.objectives, &opts)?)
    } else {
        analyze(&ma, &spec, &opts)?
    };
    let objs = &spec.objectives;
    let mut code = 0;
    let (approx, mut doc) = match &outcome {
        QueryOutcome::Pareto(r) => (Some(r), json!({ "kind": "pareto", "verdict": Value::Null })),
        QueryOutcome::Achievability(r) => {
            let mut d = json!({ "kind": "achievability", "verdict": r.verdict.name() });
            match &r.verdict {
                Verdict::Achievable(w) => d["witness"] = serde_json::to_value(w)?,
                Verdict::Unknown(g) => {
                    code = 2;
                    d["gap_report"] = json!({ "distance": g.distance });
                }
                Verdict::NotAchievable => {}
            }
            (r.approx.as_ref(), d)
        }
        QueryOutcome::Numerical(r) => {
            let d = json!({
                "kind": "numerical",
                "verdict": Value::Null,
                "value": { "objective": r.objective, "lo": r.lo, "hi": r.hi },
                "witness": serde_json::to_value(&r.witness)?,
            });
            (Some(&r.approx), d)
        }
    };
    let body = approx_json(approx, objs);
    for (k, v) in body.as_object().expect("object") {
        doc[k] = v.clone();
    }
    doc["query"] = json!(query);
    doc["objectives"] = json!(objs.iter().map(|o| o.text.clone()).collect::<Vec<_>>());
    doc["wall_time_ms"] = elapsed(&a.common, start);
    let text = match a.common.format {
        Format::Json => serde_json::to_string_pretty(&doc)? + "\n",
        Format::Csv => under_csv(approx, objs),
    };
    Ok(Report { text, code })
}

/// Scheduler read from a file.
enum LoadedScheduler {
    Threshold(ThresholdScheduler),
    Description(SchedulerDescription),
}

fn read_scheduler(path: &Path) -> Result<LoadedScheduler> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(w) = v.get("witness") {
        v = w.clone();
    }
    if v.get("rules").is_some() {
        return Ok(LoadedScheduler::Threshold(serde_json::from_value(v).context("threshold scheduler")?));
    }
    Ok(LoadedScheduler::Description(serde_json::from_value(v).context("scheduler description")?))
}

/// Event estimating `obj`, adding a time reward to `ma` when needed.
fn event_of(ma: &mut MarkovAutomaton, obj: &Objective) -> PathEvent {
    match &obj.kind {
        ObjectiveKind::UntimedReach { goal } => PathEvent::UntimedReach { goal: goal.clone() },
        ObjectiveKind::TimedReach { goal, interval } => PathEvent::TimedReach { goal: goal.clone(), interval: *interval },
        ObjectiveKind::ExpReward { reward, goal } => PathEvent::RewardToGoal { reward: *reward, goal: goal.clone() },
        ObjectiveKind::ExpTime { goal } => {
            let mut r = RewardFunction::new("#time");
            for s in 0..ma.num_states {
                if ma.is_markovian(s) {
                    r.state_rewards.insert(s, 1.0);
                }
            }
            ma.rewards.push(r);
            PathEvent::RewardToGoal { reward: ma.rewards.len() - 1, goal: goal.clone() }
        }
    }
}

fn simulate(a: &SimulateArgs) -> Result<Report> {
    let common = &a.analysis.common;
    set_workers(common.workers)?;
    let (mut ma, spec, query) = load(common)?;
    let start = Instant::now();
    let (sched, source) = match &a.scheduler {
        Some(p) => (read_scheduler(p)?, "file"),
        None => {
            let opts = options(&a.analysis)?;
            let w = match analyze(&ma, &spec, &opts)? {
                QueryOutcome::Achievability(r) => match r.verdict {
                    Verdict::Achievable(w) => w,
                    v => bail!(NoWitness(format!("verdict is {}, no witness scheduler to simulate", v.name()))),
                },
                QueryOutcome::Numerical(r) => r.witness,
                QueryOutcome::Pareto(_) => bail!(NoWitness("pareto queries have no single witness; pass --scheduler".into())),
            };
            (LoadedScheduler::Description(w), "witness")
        }
    };
    let events: Vec<PathEvent> = spec.objectives.iter().map(|o| event_of(&mut ma, o)).collect();
    let sim: SimScheduler = match &sched {
        LoadedScheduler::Threshold(t) => t.into(),
        LoadedScheduler::Description(d) => d.into(),
    };
    let opts = EstimateOptions { samples: a.samples, confidence: a.confidence, seed: a.seed, workers: common.workers };
    let mut rows = Vec::new();
    for (o, ev) in spec.objectives.iter().zip(&events) {
        let e = estimate(&ma, sim, ev, &opts)?;
        rows.push((o, e));
    }
    let text = match common.format {
        Format::Json => {
            let estimates: Vec<Value> = rows
                .iter()
                .map(|(o, e)| {
                    let (lo, hi) = e.interval();
                    json!({ "objective": o.text, "mean": e.mean, "half_width": e.half_width, "lo": lo, "hi": hi })
                })
                .collect();
            let doc = json!({
                "query": query,
                "scheduler": source,
                "samples": a.samples,
                "confidence": a.confidence,
                "seed": a.seed,
                "estimates": estimates,
                "wall_time_ms": elapsed(common, start),
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("objective,mean,half_width\n");
            for (i, (_, e)) in rows.iter().enumerate() {
                s += &format!("{},{},{}\n", i + 1, e.mean, e.half_width);
            }
            s
        }
    };
    Ok(Report { text, code: 0 })
}

/// No scheduler is available to simulate.
#[derive(Debug)]
pub struct NoWitness(String);

impl std::fmt::Display for NoWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NoWitness {}

fn generate(a: &GenerateArgs) -> Result<u8> {
    let p = match a.family {
        FamilyArg::Jobs => BenchmarkParams::jobs(a.n, a.k),
        FamilyArg::Polling => BenchmarkParams::polling(a.n, a.k),
        FamilyArg::Stream => BenchmarkParams::stream(a.n),
        FamilyArg::Mutex => BenchmarkParams::mutex(a.n),
    };
    let b = generate_benchmark(&p)?;
    let text = serialize_model(&b.model);
    match &a.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            let summary = json!({
                "family": format!("{:?}", p.family).to_lowercase(),
                "n": p.n,
                "k": p.k,
                "states": b.model.num_states,
                "markovian_states": (0..b.model.num_states).filter(|&s| b.model.is_markovian(s)).count(),
                "labels": b.labels,
                "rewards": b.rewards,
                "queries": b.queries,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        None => print!("{text}"),
    }
    Ok(0)
}
