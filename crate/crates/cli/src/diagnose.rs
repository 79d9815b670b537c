use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use sparsefeas::diagnostics::{
    check_strong_regularity, diagnose, rip_constants, DiagnosticReport, StrongRegularityReport,
    DEFAULT_ENUMERATION_CAP, ORTHONORMAL_TOL,
};
use sparsefeas::solvers::{predict_rates, RatePrediction};
use sparsefeas::{Error, FeasibilityProblem};

use crate::manifest::{fingerprint, seconds, RunManifest};
use crate::solve::create_dir;
use crate::source::ProblemSource;
use crate::{to_json, write_file, CliError, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub source: ProblemSource,
    /// Support size to enumerate; defaults to 2s.
    #[arg(long)]
    pub order: Option<usize>,
    /// Step size used for the projected gradient rate.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Largest number of supports to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u128,
    /// Also write diagnostics.json and manifest.json here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOutput {
    pub diagnostics: DiagnosticReport,
    pub strong_regularity_report: StrongRegularityReport,
    pub rows_orthonormal: bool,
    pub rates: Option<RatePrediction>,
    /// Why `rates` is absent.
    pub rates_unavailable: Option<String>,
}

/// The report `diagnose` prints, computed through the library.
pub fn diagnose_report(problem: &FeasibilityProblem, order: usize, tau: f64, cap: u128) -> Result<DiagnoseOutput, CliError> {
    let n = problem.dim();
    if order == 0 || order > n {
        return Err(CliError::Usage(format!("order must be in 1..={n}, got {order}")));
    }
    let refuse = |e: Error| match e {
        Error::EnumerationTooLarge { n, order, count, cap } => CliError::Refused(format!(
            "C({n}, {order}) = {count} supports exceeds the cap of {cap}; lower --order or raise --cap"
        )),
        e => CliError::Library(e),
    };
    let set = &problem.affine;
    let diagnostics = diagnose(set, order, cap).map_err(refuse)?;
    let strong = check_strong_regularity(set, order, cap).map_err(refuse)?;
    let rip = rip_constants(set.matrix(), order, cap).map_err(refuse)?;
    let rows_orthonormal = set.gram_identity_defect() <= ORTHONORMAL_TOL;
    let (rates, rates_unavailable) = match predict_rates(&rip, diagnostics.uprip_delta, tau, rows_orthonormal) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DiagnoseOutput {
        diagnostics,
        strong_regularity_report: strong,
        rows_orthonormal,
        rates,
        rates_unavailable,
    })
}

pub(crate) fn run(args: &DiagnoseArgs, command_line: Vec<String>) -> Result<u8, CliError> {
    let started = Instant::now();
    let problem = args.source.load()?;
    let order = args.order.unwrap_or(2 * problem.sparsity_level());
    let output = diagnose_report(&problem, order, args.tau, args.cap)?;
    let json = to_json(&output);
    print!("{json}");
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("diagnostics.json"), &json)?;
        RunManifest {
            command_line,
            config: serde_json::json!({
                "source": args.source.describe(),
                "order": order,
                "tau": args.tau,
                "cap": args.cap.to_string(),
            }),
            problem_fingerprint: Some(fingerprint(&problem)),
            artifacts: vec!["diagnostics.json".into()],
            duration_seconds: seconds(started.elapsed()),
        }
        .write(dir)?;
    }
    Ok(EXIT_OK)
}
