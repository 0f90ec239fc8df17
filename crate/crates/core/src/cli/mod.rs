//! Batch front end: parse a run configuration, build the instance, run one command and
//! write trajectories and diagnostics.
//!
//! Exit codes: 0 success, 2 validation failure, 3 solver failure.

pub mod build;
pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fixpoint::solve_banach;
use crate::grid::TimeGrid;
use crate::stepper::{OnePass, ReportSummary, SolveReport, SystemSpec};
use crate::verify::{
    check_spec, lipschitz_dependence_experiment, regularity_check, uniqueness_experiment, Perturbation,
};

pub use build::{build_abstract, build_problem, BuiltProblem};
pub use config::{Command, Config, ExperimentKind, PerturbationName, Problem, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "dvhi",
    version,
    about = "Solve history-dependent variational-hemivariational inequalities"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `run.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Worker threads for experiment sub-runs.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Cli {
    fn apply(&self, config: &mut Config) {
        let run = &mut config.run;
        if let Some(out) = &self.out {
            run.out = out.clone();
        }
        if let Some(c) = self.command {
            run.command = c;
        }
        if let Some(s) = self.seed {
            run.seed = s;
        }
        if let Some(n) = self.steps {
            run.steps = n;
        }
        if let Some(t) = self.horizon {
            run.horizon = t;
        }
        if let Some(k) = self.workers {
            run.workers = k;
        }
    }
}

#[derive(Debug, Serialize)]
struct Hypotheses {
    smallness_margin: f64,
    constants: crate::spaces::HypothesisConstants,
}

#[derive(Debug, Serialize)]
struct SolveSection {
    summary: ReportSummary,
    per_step_inner_iters: Vec<usize>,
    inequality_residuals: Vec<f64>,
    constraint_residuals: Vec<f64>,
}

impl SolveSection {
    fn new(r: &SolveReport) -> Self {
        Self {
            summary: r.summary(),
            per_step_inner_iters: r.per_step_inner_iters.clone(),
            inequality_residuals: r.inequality_residuals.clone(),
            constraint_residuals: r.constraint_residuals.clone(),
        }
    }
}

/// Contents of `diagnostics.json`.
#[derive(Debug, Default, Serialize)]
struct Diagnostics {
    schema_version: u32,
    command: Option<Command>,
    problem: Option<Problem>,
    status: &'static str,
    error: Option<String>,
    /// Negative or zero when the smallness condition failed.
    margin: Option<f64>,
    hypotheses: Option<Hypotheses>,
    report: Option<SolveSection>,
    contraction_trace: Option<String>,
    contraction: Option<Value>,
    verify: Option<Value>,
    experiment: Option<Value>,
    outputs: Vec<String>,
}

struct Outcome {
    code: i32,
    diag: Diagnostics,
}

/// Parses process arguments and runs.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let mut config = match Config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    cli.apply(&mut config);
    let out = config.run.out.clone();
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    let outcome = match config.validate() {
        Err(e) => failure(e),
        Ok(()) => execute(&config, &out),
    };
    let mut diag = outcome.diag;
    diag.schema_version = SCHEMA_VERSION;
    diag.command = Some(config.run.command);
    diag.problem = Some(config.run.problem);
    if let Some(msg) = &diag.error {
        eprintln!("error: {msg}");
    }
    diag.outputs.push("diagnostics.json".into());
    if let Err(e) = write_json(&out.join("diagnostics.json"), &diag) {
        eprintln!("error: cannot write diagnostics: {e}");
        return EXIT_SOLVER;
    }
    outcome.code
}

fn failure(e: Error) -> Outcome {
    let validation = e.is_validation();
    let margin = match e {
        Error::Smallness { margin } => Some(margin),
        _ => None,
    };
    Outcome {
        code: if validation { EXIT_VALIDATION } else { EXIT_SOLVER },
        diag: Diagnostics {
            status: if validation {
                "validation_failure"
            } else {
                "solver_failure"
            },
            error: Some(e.to_string()),
            margin,
            ..Default::default()
        },
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value).map_err(|e| Error::Io(e.into()))
}

fn write_trajectories(out: &Path, report: &SolveReport, x_label: &str) -> Result<()> {
    report.write_csv_labeled(BufWriter::new(File::create(out.join("trajectories.csv"))?), x_label)
}

fn execute(config: &Config, out: &Path) -> Outcome {
    let built = match build_problem(config) {
        Ok(b) => b,
        Err(e) => return failure(e),
    };
    let spec = &built.spec;
    let hypotheses = Hypotheses {
        smallness_margin: spec.smallness_margin(),
        constants: spec.constants,
    };
    let grid = match TimeGrid::new(config.run.horizon, config.run.steps) {
        Ok(g) => g,
        Err(e) => return failure(e),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.run.workers).build() {
        Ok(p) => p,
        Err(e) => return failure(Error::Config(format!("worker pool: {e}"))),
    };
    let mut diag = Diagnostics {
        status: "ok",
        margin: Some(hypotheses.smallness_margin),
        hypotheses: Some(hypotheses),
        ..Default::default()
    };
    let result = pool.install(|| match config.run.command {
        Command::Solve => solve(config, &built, grid, out, &mut diag),
        Command::SolveBanach => solve_fixed_point(config, &built, grid, out, &mut diag),
        Command::Verify => verify(config, spec, grid, &mut diag),
        Command::Experiment => experiment(config, spec, grid, out, &mut diag),
    });
    match result {
        Ok(code) => Outcome { code, diag },
        Err(e) => {
            let f = failure(e);
            diag.status = f.diag.status;
            diag.error = f.diag.error;
            Outcome { code: f.code, diag }
        }
    }
}

fn solve(config: &Config, built: &BuiltProblem, grid: TimeGrid, out: &Path, diag: &mut Diagnostics) -> Result<i32> {
    let mut pass = OnePass::start(&built.spec, grid, config.solver)?;
    let mut failed = None;
    while pass.node() < grid.steps() {
        if let Err(e) = pass.step() {
            failed = Some(e);
            break;
        }
    }
    let report = match failed {
        None => pass.finish()?,
        Some(e) => {
            // flush what was computed before the failure
            if let Some(partial) = pass.partial() {
                write_trajectories(out, &partial, built.x_label)?;
                diag.outputs.push("trajectories.csv".into());
                diag.report = Some(SolveSection::new(&partial));
            }
            return Err(e);
        }
    };
    write_trajectories(out, &report, built.x_label)?;
    diag.outputs.push("trajectories.csv".into());
    diag.report = Some(SolveSection::new(&report));
    Ok(EXIT_OK)
}

fn solve_fixed_point(
    config: &Config,
    built: &BuiltProblem,
    grid: TimeGrid,
    out: &Path,
    diag: &mut Diagnostics,
) -> Result<i32> {
    let (report, trace) = solve_banach(&built.spec, grid, &config.solver, &config.banach, None)?;
    write_trajectories(out, &report, built.x_label)?;
    trace.write_csv(BufWriter::new(File::create(out.join("contraction.csv"))?))?;
    diag.outputs.push("trajectories.csv".into());
    diag.outputs.push("contraction.csv".into());
    diag.contraction_trace = Some("contraction.csv".into());
    diag.contraction = Some(json!({
        "beta": trace.beta,
        "c_est": trace.c_est,
        "iterations": trace.iterations(),
        "max_ratio_after_3": trace.max_ratio_from(3),
    }));
    diag.report = Some(SolveSection::new(&report));
    Ok(EXIT_OK)
}

fn verify(config: &Config, spec: &SystemSpec, grid: TimeGrid, diag: &mut Diagnostics) -> Result<i32> {
    let report = check_spec(spec, &grid, config.experiment.samples, config.run.seed)?;
    let pass = report.pass;
    diag.verify = Some(serde_json::to_value(&report).map_err(|e| Error::Io(e.into()))?);
    if pass {
        Ok(EXIT_OK)
    } else {
        diag.status = "validation_failure";
        diag.error = Some("sampled hypothesis checks failed".into());
        Ok(EXIT_VALIDATION)
    }
}

fn seeds(config: &Config) -> Vec<u64> {
    if config.experiment.seeds.is_empty() {
        vec![config.run.seed]
    } else {
        config.experiment.seeds.clone()
    }
}

fn perturbation(p: PerturbationName) -> Perturbation {
    match p {
        PerturbationName::X0 => Perturbation::X0,
        PerturbationName::W0 => Perturbation::W0,
        PerturbationName::F => Perturbation::F,
    }
}

fn experiment(config: &Config, spec: &SystemSpec, grid: TimeGrid, out: &Path, diag: &mut Diagnostics) -> Result<i32> {
    let ex = &config.experiment;
    let value = match ex.kind {
        ExperimentKind::Lipschitz => {
            let jobs: Vec<(PerturbationName, u64)> = ex
                .perturbations
                .iter()
                .flat_map(|&p| seeds(config).into_iter().map(move |s| (p, s)))
                .collect();
            let tables = jobs
                .par_iter()
                .map(|&(p, s)| {
                    lipschitz_dependence_experiment(spec, grid, &config.solver, &ex.deltas, perturbation(p), s)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut summary = Vec::new();
            for table in &tables {
                let name = format!("lipschitz_{}_seed{}.csv", table.perturbation.name(), table.seed);
                table.write_csv(BufWriter::new(File::create(out.join(&name))?))?;
                diag.outputs.push(name.clone());
                summary.push(json!({
                    "perturbation": table.perturbation.name(),
                    "seed": table.seed,
                    "table": name,
                    "spread": table.spread,
                    "stable": table.stable,
                    "rows": table.rows,
                }));
            }
            json!({ "kind": "lipschitz", "tables": summary, "all_stable": tables.iter().all(|t| t.stable) })
        }
        ExperimentKind::Uniqueness => {
            let reports = seeds(config)
                .par_iter()
                .map(|&s| uniqueness_experiment(spec, grid, &config.solver, &config.banach, s).map(|r| (s, r)))
                .collect::<Result<Vec<_>>>()?;
            let all = reports.iter().all(|(_, r)| r.pass);
            let rows: Vec<Value> = reports.iter().map(|(s, r)| json!({ "seed": s, "report": r })).collect();
            json!({ "kind": "uniqueness", "runs": rows, "pass": all })
        }
        ExperimentKind::Regularity => {
            let (coarse, fine) = rayon::join(
                || crate::stepper::solve_onepass(spec, grid, &config.solver),
                || crate::stepper::solve_onepass(spec, grid.refined(), &config.solver),
            );
            let report = regularity_check(spec, &coarse?, &fine?)?;
            json!({ "kind": "regularity", "report": report })
        }
    };
    diag.experiment = Some(value);
    Ok(EXIT_OK)
}
