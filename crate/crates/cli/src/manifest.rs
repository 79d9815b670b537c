use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparsefeas::FeasibilityProblem;

use crate::{to_json, write_file, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written last into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    /// SHA-256 of the canonical problem JSON, when the run has one problem.
    pub problem_fingerprint: Option<String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_file(&dir.join(MANIFEST_FILE), &to_json(self))
    }
}

pub(crate) fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// SHA-256, hex encoded, of the problem's canonical JSON document.
pub fn fingerprint(problem: &FeasibilityProblem) -> String {
    let digest = Sha256::digest(problem.to_document().to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
