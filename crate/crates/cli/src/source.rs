use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sparsefeas::problems::{build, GeneratorKind, GeneratorSpec};
use sparsefeas::{load_problem, FeasibilityProblem};

use crate::{io_error, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    #[value(name = "hadamard7x8")]
    Hadamard7x8,
    Pathological,
}

impl Builtin {
    pub fn kind(self) -> GeneratorKind {
        match self {
            Builtin::Hadamard7x8 => GeneratorKind::Hadamard7x8,
            Builtin::Pathological => GeneratorKind::Pathological,
        }
    }
}

/// Exactly one of a built-in instance, a problem JSON file or a generator
/// spec JSON file.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct ProblemSource {
    /// Built-in instance.
    #[arg(long)]
    pub builtin: Option<Builtin>,
    /// Problem JSON with fields M, p, s and optionally known_solution.
    #[arg(long, value_name = "FILE")]
    pub problem: Option<PathBuf>,
    /// Generator spec JSON, e.g. {"kind": "gaussian", "m": 12, "n": 30, "s": 3, "seed": 1}.
    #[arg(long, value_name = "FILE")]
    pub generator: Option<PathBuf>,
}

impl ProblemSource {
    pub fn builtin(b: Builtin) -> Self {
        Self {
            builtin: Some(b),
            problem: None,
            generator: None,
        }
    }

    pub fn load(&self) -> Result<FeasibilityProblem, CliError> {
        if let Some(b) = self.builtin {
            return Ok(build(&GeneratorSpec::builtin(b.kind()))?);
        }
        if let Some(path) = &self.problem {
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            return Ok(load_problem(&text)?);
        }
        if let Some(path) = &self.generator {
            let text = std::fs::read_to_string(path).map_err(io_error(path))?;
            let spec: GeneratorSpec =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            return Ok(build(&spec)?);
        }
        Err(CliError::Usage("no problem given".into()))
    }

    pub fn describe(&self) -> serde_json::Value {
        if let Some(b) = self.builtin {
            serde_json::json!({ "builtin": b.kind().as_str() })
        } else if let Some(p) = &self.problem {
            serde_json::json!({ "problem": p.display().to_string() })
        } else if let Some(g) = &self.generator {
            serde_json::json!({ "generator": g.display().to_string() })
        } else {
            serde_json::Value::Null
        }
    }
}
