use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use sparsefeas::problems::perturb_start;
use sparsefeas::solvers::{estimate_rate, run as run_solver, Algorithm, IterationTrace, Quantity, SolverConfig, Termination};
use sparsefeas::{DVector, FeasibilityProblem};

use crate::manifest::{fingerprint, seconds, RunManifest};
use crate::source::ProblemSource;
use crate::{io_error, to_json, write_file, CliError, EXIT_NONCONVERGENT, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: ProblemSource,
    #[arg(long, default_value = "ap", value_parser = parse_algorithm)]
    pub alg: Algorithm,
    /// Step size of projected gradients.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub gap_tol: f64,
    /// Start at the known solution plus uniform noise in (-r, r) per entry.
    #[arg(long, value_name = "R", conflicts_with = "x0_file")]
    pub perturb: Option<f64>,
    /// Seed of the perturbation; drawn from the clock when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Starting point as a JSON array of numbers.
    #[arg(long, value_name = "FILE")]
    pub x0_file: Option<PathBuf>,
    #[arg(long, default_value = "sparsefeas-out", value_name = "DIR")]
    pub out: PathBuf,
    /// Also write every iterate to iterates.csv.
    #[arg(long)]
    pub store_iterates: bool,
    #[arg(long)]
    pub no_cycle_detection: bool,
}

pub(crate) fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub algorithm: Algorithm,
    pub termination: Termination,
    pub iterations: usize,
    pub final_gap: f64,
    /// Tail contraction factor of the gap; absent when it cannot be fitted.
    pub empirical_rate: Option<f64>,
    pub ambiguity_count: usize,
    pub period: Option<usize>,
    pub distance_to_solution: Option<f64>,
    pub solution_estimate: Vec<f64>,
}

/// Summary of a trace as written to summary.json.
pub fn solve_summary(problem: &FeasibilityProblem, trace: &IterationTrace) -> SolveSummary {
    let estimate = trace.solution_estimate();
    SolveSummary {
        algorithm: trace.algorithm,
        termination: trace.termination,
        iterations: trace.iterations(),
        final_gap: trace.final_gap(),
        empirical_rate: estimate_rate(trace, Quantity::Gap).ok(),
        ambiguity_count: trace.ambiguity_count(),
        period: trace.cycle.as_ref().map(|c| c.period),
        distance_to_solution: problem.known_solution.as_ref().map(|x| (estimate - x).norm()),
        solution_estimate: estimate.iter().copied().collect(),
    }
}

fn entropy_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    nanos ^ (u64::from(std::process::id()) << 32)
}

fn read_point(path: &Path, n: usize) -> Result<DVector<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    let values: Vec<f64> =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if values.len() != n {
        return Err(CliError::Usage(format!(
            "{}: starting point has {} entries, problem has n = {n}",
            path.display(),
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))
}

pub(crate) fn run(args: &SolveArgs, command_line: Vec<String>) -> Result<u8, CliError> {
    let started = Instant::now();
    let problem = args.source.load()?;
    let config = SolverConfig {
        max_iterations: args.max_iters,
        gap_tol: args.gap_tol,
        cycle_detection: !args.no_cycle_detection,
        store_iterates: args.store_iterates,
        step_size: args.tau,
        ..SolverConfig::default()
    };
    config.validate()?;

    let mut seed = None;
    let x0 = match (&args.x0_file, args.perturb) {
        (Some(path), _) => read_point(path, problem.dim())?,
        (None, Some(radius)) => {
            let s = args.seed.unwrap_or_else(entropy_seed);
            seed = Some(s);
            perturb_start(&problem, radius, s)?.point
        }
        (None, None) => DVector::zeros(problem.dim()),
    };

    let trace = run_solver(args.alg, &problem, &x0, &config)?;
    let summary = solve_summary(&problem, &trace);

    create_dir(&args.out)?;
    let mut artifacts = vec!["trace.csv".to_string(), "summary.json".to_string()];
    write_file(&args.out.join("trace.csv"), &trace.to_csv())?;
    write_file(&args.out.join("summary.json"), &to_json(&summary))?;
    if let Some(csv) = trace.iterates_csv() {
        write_file(&args.out.join("iterates.csv"), &csv)?;
        artifacts.push("iterates.csv".into());
    }
    RunManifest {
        command_line,
        config: serde_json::json!({
            "source": args.source.describe(),
            "algorithm": args.alg,
            "solver": config,
            "perturb": args.perturb,
            "seed": seed,
            "x0_file": args.x0_file.as_ref().map(|p| p.display().to_string()),
        }),
        problem_fingerprint: Some(fingerprint(&problem)),
        artifacts,
        duration_seconds: seconds(started.elapsed()),
    }
    .write(&args.out)?;

    println!(
        "{}: {} after {} iterations, gap {:e}",
        args.alg.as_str(),
        trace.termination.as_str(),
        trace.iterations(),
        trace.final_gap()
    );
    Ok(if trace.termination == Termination::Converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGENT
    })
}
