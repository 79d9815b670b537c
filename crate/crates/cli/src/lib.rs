//! Command-line front end: `solve`, `diagnose`, `reproduce` and `generate`.
//!
//! Exit codes: 0 converged (or verdict PASS), 1 usage or data error,
//! 2 non-convergent termination (or verdict FAIL), 3 diagnostics refused.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod diagnose;
mod generate;
mod manifest;
pub mod reproduce;
mod solve;
mod source;

pub use diagnose::{diagnose_report, DiagnoseArgs, DiagnoseOutput};
pub use generate::GenerateArgs;
pub use manifest::{fingerprint, RunManifest};
pub use reproduce::{FigureTag, ReproduceArgs, Verdict};
pub use solve::{solve_summary, SolveArgs, SolveSummary};
pub use source::{Builtin, ProblemSource};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NONCONVERGENT: u8 = 2;
pub const EXIT_REFUSED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "sparsefeas", version, about = "Sparse affine feasibility solvers and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run AP, DR or PG on one problem and write trace.csv, summary.json and manifest.json.
    Solve(SolveArgs),
    /// Restricted isometry constants, strong regularity and predicted rates.
    Diagnose(DiagnoseArgs),
    /// Rerun a figure or worked example at desk scale and write a verdict.
    Reproduce(ReproduceArgs),
    /// Write a generated problem as JSON.
    Generate(GenerateArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] sparsefeas::Error),
    #[error("{0}")]
    Refused(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Refused(_) => EXIT_REFUSED,
            _ => EXIT_USAGE,
        }
    }
}

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_error(path))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

/// Runs a parsed command and returns its exit code.
pub fn execute(cli: Cli, command_line: Vec<String>) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve(args) => solve::run(&args, command_line),
        Command::Diagnose(args) => diagnose::run(&args, command_line),
        Command::Reproduce(args) => reproduce::run(&args, command_line),
        Command::Generate(args) => generate::run(&args),
    }
}

pub fn main_with_args(args: Vec<OsString>) -> ExitCode {
    let command_line: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match execute(cli, command_line) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
