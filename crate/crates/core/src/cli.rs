//! Command-line front end: argument resolution, command execution and report
//! formatting. Commands return their data as strings so they can be tested
//! and replayed without touching the process streams.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dcsp::{self, SolveOptions, SOLUTION_LIST_LIMIT};
use crate::ensemble;
use crate::error::{Error, Result};
use crate::kb::AbductionIndex;
use crate::manifest::{InputDigest, RunManifest};
use crate::risks::{self, Predictor, DEFAULT_A3_CANDIDATES};
use crate::simulate::{self, CoverageReport, SweepResult};
use crate::task::{Task, TaskSpec};

/// Overrides the solution cap for every command.
pub const ENV_SOLUTION_CAP: &str = "NESY_DCSP_SOLUTION_CAP";
/// Overrides the candidate-pool cap for every command.
pub const ENV_POOL_CAP: &str = "NESY_DCSP_POOL_CAP";

#[derive(Debug, Parser)]
#[command(name = "nesy-dcsp", version, about = "Learnability analysis of neuro-symbolic tasks")]
pub struct Cli {
    /// Write the run manifest here instead of to stderr.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Task-level learnability verdict as JSON.
    Analyze {
        task: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Omit the explicit solution list above this many solutions.
        #[arg(long, default_value_t = SOLUTION_LIST_LIMIT)]
        list_limit: usize,
    },
    /// Seeded sampling + ERM trials as CSV.
    Sample {
        task: PathBuf,
        /// Comma-separated sample sizes.
        #[arg(long = "n", value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Base seed (defaults to the task file's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the per-N summary CSV here.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Also write the coverage-event CSV here.
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// Fill the runtime_ms column with wall-clock times (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Merged analysis of several tasks (JSON) or the modular-addition grid (CSV).
    Ensemble {
        tasks: Vec<PathBuf>,
        /// Inclusive base range such as `2..10`.
        #[arg(long, value_parser = parse_range, conflicts_with = "tasks")]
        modadd_grid: Option<(u32, u32)>,
        /// Concept count for the grid tasks.
        #[arg(long, default_value_t = 10)]
        concepts: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = SOLUTION_LIST_LIMIT)]
        list_limit: usize,
    },
    /// Risk functionals of a predictor table as JSON.
    Risks {
        task: PathBuf,
        /// Matrix file, or `identity` / `uniform`.
        #[arg(long)]
        predictor: String,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SurrogateArg::All])]
        surrogate: Vec<SurrogateArg>,
        /// A3 candidate-set size.
        #[arg(long = "n", default_value_t = DEFAULT_A3_CANDIDATES)]
        candidates: usize,
        #[arg(long)]
        pool_cap: Option<usize>,
    },
    /// Sample-complexity bound as JSON.
    Bound {
        task: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        pool_cap: Option<usize>,
    },
    /// Re-run the invocation recorded in a manifest.
    Replay { manifest_file: PathBuf },
}

#[derive(Debug, Default, Args)]
pub struct SolverArgs {
    /// Require distinct clusters to take distinct concepts.
    #[arg(long)]
    pub injective: Option<bool>,
    #[arg(long)]
    pub solution_cap: Option<usize>,
    #[arg(long)]
    pub pool_cap: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateArg {
    Nesy,
    Pnl,
    Abl,
    A3,
    All,
}

fn parse_range(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected `kmin..kmax`, got `{s}`"))?;
    let a: u32 = a.trim().parse().map_err(|_| format!("bad lower bound in `{s}`"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad upper bound in `{s}`"))?;
    if a > b {
        return Err(format!("empty range `{s}`"));
    }
    Ok((a, b))
}

/// A fully resolved command; stored in manifests and replayed verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Analyze {
        task: PathBuf,
        options: SolveOptions,
        pool_cap: usize,
        list_limit: usize,
    },
    Sample {
        task: PathBuf,
        grid: Vec<usize>,
        repeats: usize,
        seed: u64,
        options: SolveOptions,
        pool_cap: usize,
        summary: Option<PathBuf>,
        coverage: Option<PathBuf>,
        timing: bool,
    },
    Ensemble {
        tasks: Vec<PathBuf>,
        options: SolveOptions,
        pool_cap: usize,
        list_limit: usize,
    },
    Grid {
        bases: (u32, u32),
        concepts: usize,
        options: SolveOptions,
    },
    Risks {
        task: PathBuf,
        predictor: String,
        surrogates: Vec<SurrogateArg>,
        candidates: usize,
        pool_cap: usize,
    },
    Bound {
        task: PathBuf,
        epsilon: f64,
        pool_cap: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// An enumeration cap fired somewhere.
    CapBreach,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::CapBreach => 2,
        }
    }
}

/// What a command produced.
#[derive(Debug)]
pub struct RunOutput {
    pub stdout: String,
    /// Extra data files to write, in order.
    pub files: Vec<(PathBuf, String)>,
    pub diagnostics: Vec<String>,
    pub status: Status,
    pub manifest: RunManifest,
}

fn env_cap(name: &str) -> Result<Option<usize>> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::ParameterOutOfRange(format!("{name}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve_solver(args: &SolverArgs, spec: &TaskSpec) -> Result<(SolveOptions, usize)> {
    let solution_cap = args.solution_cap.or(env_cap(ENV_SOLUTION_CAP)?).unwrap_or(spec.options.solution_cap);
    let pool_cap = args.pool_cap.or(env_cap(ENV_POOL_CAP)?).unwrap_or(spec.pool_cap);
    Ok((SolveOptions { injective: args.injective.unwrap_or(spec.options.injective), solution_cap }, pool_cap))
}

fn resolve_pool_cap(arg: Option<usize>, spec: &TaskSpec) -> Result<usize> {
    Ok(arg.or(env_cap(ENV_POOL_CAP)?).unwrap_or(spec.pool_cap))
}

/// Turns parsed arguments into a resolved invocation (defaults, task-file
/// settings and environment overrides applied). `None` for `replay`.
pub fn resolve(command: &Command) -> Result<Option<Invocation>> {
    let inv = match command {
        Command::Analyze { task, solver, list_limit } => {
            let spec = TaskSpec::from_file(task)?;
            let (options, pool_cap) = resolve_solver(solver, &spec)?;
            Invocation::Analyze { task: task.clone(), options, pool_cap, list_limit: *list_limit }
        }
        Command::Sample { task, grid, repeats, seed, summary, coverage, timing, solver } => {
            let spec = TaskSpec::from_file(task)?;
            let (options, pool_cap) = resolve_solver(solver, &spec)?;
            Invocation::Sample {
                task: task.clone(),
                grid: grid.clone(),
                repeats: *repeats,
                seed: seed.unwrap_or(spec.seed),
                options,
                pool_cap,
                summary: summary.clone(),
                coverage: coverage.clone(),
                timing: *timing,
            }
        }
        Command::Ensemble { tasks, modadd_grid, concepts, solver, list_limit } => match modadd_grid {
            Some(bases) => {
                let solution_cap =
                    solver.solution_cap.or(env_cap(ENV_SOLUTION_CAP)?).unwrap_or(dcsp::DEFAULT_SOLUTION_CAP);
                Invocation::Grid {
                    bases: *bases,
                    concepts: *concepts,
                    options: SolveOptions { injective: solver.injective.unwrap_or(true), solution_cap },
                }
            }
            None => {
                if tasks.is_empty() {
                    return Err(Error::EmptyEnsemble);
                }
                let specs = tasks.iter().map(|t| TaskSpec::from_file(t)).collect::<Result<Vec<_>>>()?;
                let solution_cap = solver
                    .solution_cap
                    .or(env_cap(ENV_SOLUTION_CAP)?)
                    .unwrap_or_else(|| specs.iter().map(|s| s.options.solution_cap).min().unwrap_or(1));
                let pool_cap = solver
                    .pool_cap
                    .or(env_cap(ENV_POOL_CAP)?)
                    .unwrap_or_else(|| specs.iter().map(|s| s.pool_cap).min().unwrap_or(1));
                let injective = solver.injective.unwrap_or_else(|| specs.iter().all(|s| s.options.injective));
                Invocation::Ensemble {
                    tasks: tasks.clone(),
                    options: SolveOptions { injective, solution_cap },
                    pool_cap,
                    list_limit: *list_limit,
                }
            }
        },
        Command::Risks { task, predictor, surrogate, candidates, pool_cap } => {
            let spec = TaskSpec::from_file(task)?;
            let mut surrogates: Vec<SurrogateArg> = if surrogate.contains(&SurrogateArg::All) {
                vec![SurrogateArg::Nesy, SurrogateArg::Pnl, SurrogateArg::Abl, SurrogateArg::A3]
            } else {
                surrogate.clone()
            };
            surrogates.dedup();
            Invocation::Risks {
                task: task.clone(),
                predictor: predictor.clone(),
                surrogates,
                candidates: *candidates,
                pool_cap: resolve_pool_cap(*pool_cap, &spec)?,
            }
        }
        Command::Bound { task, epsilon, pool_cap } => {
            let spec = TaskSpec::from_file(task)?;
            Invocation::Bound { task: task.clone(), epsilon: *epsilon, pool_cap: resolve_pool_cap(*pool_cap, &spec)? }
        }
        Command::Replay { .. } => return Ok(None),
    };
    Ok(Some(inv))
}

/// Resolves and runs a parsed command line.
pub fn run(cli: &Cli) -> Result<RunOutput> {
    match &cli.command {
        Command::Replay { manifest_file } => {
            let manifest = RunManifest::load(manifest_file)?;
            for input in &manifest.inputs {
                input.verify()?;
            }
            execute(&manifest.invocation)
        }
        command => execute(&resolve(command)?.expect("non-replay command")),
    }
}

fn load_task(path: &Path, pool_cap: usize) -> Result<Task> {
    let mut spec = TaskSpec::from_file(path)?;
    spec.pool_cap = pool_cap;
    spec.build()
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn distribution_note(task: &Task) -> String {
    if task.distribution.is_uniform() {
        "concept-sequence distribution: uniform over the candidate pool (kappa = 1/|B|)".to_string()
    } else {
        "concept-sequence distribution: explicit weights from the task file".to_string()
    }
}

const ERM_NOTE: &str = "ERM ties broken uniformly at random among enumerated solutions (seeded)";
const TIE_NOTE: &str =
    "argmax ties resolve to the lowest concept id; abduction and A3 ties to the lexicographically smallest candidate";
const LOG_NOTE: &str = "sample-complexity bound uses the natural logarithm";

/// Verdict JSON shared by `analyze` and `ensemble`.
fn verdict_json(
    space: &dcsp::SolutionSpace,
    list_limit: usize,
    diagnostics: &mut Vec<String>,
) -> (Map<String, Value>, Status) {
    let Value::Object(mut obj) = space.to_json(list_limit) else { unreachable!("object") };
    let status = match dcsp::verdict(space) {
        Ok(r) => {
            obj.insert("learnable".into(), json!(r.learnable));
            obj.insert("d_over_L".into(), num(r.error_bound));
            Status::Ok
        }
        Err(e) => {
            diagnostics.push(format!("verdict withheld: {e}"));
            obj.insert("learnable".into(), Value::Null);
            obj.insert("d_over_L".into(), Value::Null);
            obj.insert("note".into(), json!(e.to_string()));
            if space.is_complete() {
                Status::Failed
            } else {
                Status::CapBreach
            }
        }
    };
    (obj, status)
}

/// Runs a resolved invocation.
pub fn execute(inv: &Invocation) -> Result<RunOutput> {
    let mut diagnostics = Vec::new();
    let mut files = Vec::new();
    let mut inputs = Vec::new();
    let mut assumptions = Vec::new();

    let (stdout, status) = match inv {
        Invocation::Analyze { task, options, pool_cap, list_limit } => {
            inputs.push(InputDigest::of(task)?);
            let t = load_task(task, *pool_cap)?;
            let inst = dcsp::DcspInstance::task_level(&t.index)?.with_injective(options.injective);
            let space = dcsp::solve_enumerate(&inst, options.solution_cap)?;
            let (mut obj, status) = verdict_json(&space, *list_limit, &mut diagnostics);
            obj.insert("task".into(), json!(t.spec.name));
            obj.insert("injective".into(), json!(options.injective));
            obj.insert("constraints".into(), json!(inst.constraint_count()));
            obj.insert("pool_size".into(), json!(t.index.pool_size()));
            (pretty(&Value::Object(obj))?, status)
        }
        Invocation::Sample { task, grid, repeats, seed, options, pool_cap, summary, coverage, timing } => {
            inputs.push(InputDigest::of(task)?);
            let t = load_task(task, *pool_cap)?;
            assumptions.push(distribution_note(&t));
            assumptions.push(ERM_NOTE.to_string());
            let result = simulate::sweep(&t.index, &t.distribution, grid, *repeats, *seed, options)?;
            if let Some(path) = coverage {
                let rep = simulate::coverage_from_trials(&t.index, &t.distribution, grid, *repeats, &result.trials);
                files.push((path.clone(), coverage_csv(&rep)?));
                if rep.has_violation() {
                    diagnostics.push("coverage frequency exceeded its bound beyond the 99% slack".into());
                }
            }
            if let Some(path) = summary {
                files.push((path.clone(), summary_csv(&result)?));
            }
            let mut status = Status::Ok;
            for trial in result.trials.iter().filter(|t| !t.complete) {
                diagnostics.push(format!(
                    "trial seed {} (N = {}) hit the solution cap; its choice covers the first {} solutions only",
                    trial.seed, trial.samples, trial.num_solutions
                ));
                status = Status::CapBreach;
            }
            (trials_csv(&result, *timing)?, status)
        }
        Invocation::Ensemble { tasks, options, pool_cap, list_limit } => {
            let mut members = Vec::new();
            let mut names = Vec::new();
            for path in tasks {
                inputs.push(InputDigest::of(path)?);
                let t = load_task(path, *pool_cap)?;
                names.push(t.spec.name.clone());
                members.push(t.index);
            }
            let space = ensemble::solve_ensemble(&members, options)?;
            let (mut obj, status) = verdict_json(&space, *list_limit, &mut diagnostics);
            obj.insert("tasks".into(), json!(names));
            obj.insert("injective".into(), json!(options.injective));
            (pretty(&Value::Object(obj))?, status)
        }
        Invocation::Grid { bases, concepts, options } => {
            let ks: Vec<u32> = (bases.0..=bases.1).collect();
            let cells = ensemble::ensemble_grid(&ks, *concepts, options)?;
            let mut status = Status::Ok;
            for c in cells.iter().filter(|c| !c.complete) {
                diagnostics.push(format!("cell ({}, {}) hit the solution cap", c.k1, c.k2));
                status = Status::CapBreach;
            }
            let mut buf = Vec::new();
            ensemble::write_grid_csv(&cells, &mut buf)?;
            (String::from_utf8(buf).expect("utf-8 csv"), status)
        }
        Invocation::Risks { task, predictor, surrogates, candidates, pool_cap } => {
            inputs.push(InputDigest::of(task)?);
            let t = load_task(task, *pool_cap)?;
            let l = t.index.kb().concepts();
            let pred = match predictor.as_str() {
                p if Path::new(p).exists() => {
                    inputs.push(InputDigest::of(Path::new(p))?);
                    Predictor::parse(&std::fs::read_to_string(p)?)?
                }
                "identity" => Predictor::identity(l),
                "uniform" => Predictor::uniform(l),
                p => return Err(Error::InvalidPredictor(format!("{p}: no such file"))),
            };
            assumptions.push(distribution_note(&t));
            let obj = risks_json(&pred, &t.index, &t.distribution, surrogates, *candidates)?;
            let mut obj = obj;
            obj.insert("task".into(), json!(t.spec.name));
            obj.insert("predictor".into(), json!(predictor));
            obj.insert("tie_break".into(), json!(TIE_NOTE));
            (pretty(&Value::Object(obj))?, Status::Ok)
        }
        Invocation::Bound { task, epsilon, pool_cap } => {
            inputs.push(InputDigest::of(task)?);
            let t = load_task(task, *pool_cap)?;
            assumptions.push(distribution_note(&t));
            assumptions.push(LOG_NOTE.to_string());
            let b = simulate::sample_complexity_bound(&t.index, &t.distribution, *epsilon)?;
            let v = json!({
                "task": t.spec.name,
                "kappa": num(b.kappa),
                "pool_size": b.pool_size,
                "epsilon": num(b.epsilon),
                "bound": num(b.bound),
                "min_samples": b.min_samples,
            });
            (pretty(&v)?, Status::Ok)
        }
    };
    Ok(RunOutput { stdout, files, diagnostics, status, manifest: RunManifest::new(inv.clone(), inputs, assumptions) })
}

fn risks_json(
    pred: &Predictor,
    index: &AbductionIndex,
    dist: &simulate::ConceptDistribution,
    surrogates: &[SurrogateArg],
    candidates: usize,
) -> Result<Map<String, Value>> {
    let mut obj = Map::new();
    obj.insert("concept".into(), num(risks::concept_risk(pred)));
    for s in surrogates {
        let (key, value) = match s {
            SurrogateArg::Nesy => ("nesy", risks::nesy_risk(pred, index, dist)?),
            SurrogateArg::Pnl => ("pnl", risks::pnl_risk(pred, index, dist)?),
            SurrogateArg::Abl => ("abl", risks::abl_risk(pred, index, dist)?),
            SurrogateArg::A3 => ("a3", risks::a3_risk(pred, index, dist, candidates)?),
            SurrogateArg::All => continue,
        };
        obj.insert(key.into(), num(value));
    }
    if surrogates.contains(&SurrogateArg::A3) {
        obj.insert("a3_candidates".into(), json!(candidates));
    }
    Ok(obj)
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

/// Trial CSV: `task,seed,N,num_solutions,concept_error,nesy_error,covered,runtime_ms`.
pub fn trials_csv(result: &SweepResult, timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "seed", "N", "num_solutions", "concept_error", "nesy_error", "covered", "runtime_ms"])?;
    for t in &result.trials {
        let runtime = if timing { format!("{:.3}", t.runtime.as_secs_f64() * 1e3) } else { String::new() };
        w.write_record([
            result.task.clone(),
            t.seed.to_string(),
            t.samples.to_string(),
            t.num_solutions.to_string(),
            fmt_f64(t.concept_error),
            fmt_f64(t.nesy_error),
            t.covered.to_string(),
            runtime,
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 csv"))
}

/// Summary CSV: `task,N,mean_acc,stderr,bound_line,mean_reasoning_acc,reasoning_stderr`.
pub fn summary_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "N", "mean_acc", "stderr", "bound_line", "mean_reasoning_acc", "reasoning_stderr"])?;
    for r in &result.rows {
        w.write_record([
            result.task.clone(),
            r.samples.to_string(),
            fmt_f64(r.mean_concept_accuracy),
            fmt_f64(r.concept_stderr),
            fmt_f64(result.bound_line),
            fmt_f64(r.mean_reasoning_accuracy),
            fmt_f64(r.reasoning_stderr),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 csv"))
}

pub fn coverage_csv(report: &CoverageReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "task",
        "N",
        "trials",
        "empirical_q",
        "union_bound",
        "exp_bound",
        "slack",
        "violation",
        "error_rate",
    ])?;
    for r in &report.rows {
        w.write_record([
            report.task.clone(),
            r.samples.to_string(),
            r.trials.to_string(),
            fmt_f64(r.empirical_q),
            fmt_f64(r.union_bound),
            fmt_f64(r.exp_bound),
            fmt_f64(r.slack),
            r.violation.to_string(),
            fmt_f64(r.error_rate),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 csv"))
}
