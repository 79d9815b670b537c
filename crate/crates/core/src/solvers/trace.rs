use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Alternating projections `x <- P_{A_s} P_B x`.
    Ap,
    /// Douglas-Rachford `x <- (R_{A_s} R_B x + x) / 2`.
    Dr,
    /// Projected gradients / iterative hard thresholding.
    Pg,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ap => "ap",
            Algorithm::Dr => "dr",
            Algorithm::Pg => "pg",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ap" => Ok(Algorithm::Ap),
            "dr" => Ok(Algorithm::Dr),
            "pg" => Ok(Algorithm::Pg),
            other => Err(format!("unknown algorithm '{other}' (expected ap, dr or pg)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    CycleDetected,
    Stalled,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::CycleDetected => "cycle_detected",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iteration number; the record describes `x^k` produced from `x^{k-1}`.
    pub k: usize,
    /// `||x^k - x^{k-1}||`.
    pub step_length: f64,
    /// Gap distance of `x^k`; for Douglas-Rachford, of the shadow `P_B x^k`.
    pub gap_distance: f64,
    /// Distance of `x^k` (Douglas-Rachford: of its shadow) to the known solution.
    pub distance_to_solution: Option<f64>,
    /// `P_B x^k`, kept for Douglas-Rachford when iterates are stored.
    pub shadow: Option<DVector<f64>>,
    /// The sparse projection in this step had more than one optimal support.
    pub ambiguous: bool,
    /// `f(x^k) = ||M x^k - p||^2 / 2`, projected gradients only.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub period: usize,
    pub members: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub algorithm: Algorithm,
    /// `x^0, x^1, ...` when requested in the configuration.
    pub iterates: Option<Vec<DVector<f64>>>,
    pub per_iteration: Vec<IterationRecord>,
    pub termination: Termination,
    pub cycle: Option<Cycle>,
    pub final_point: DVector<f64>,
    /// `P_B` of the final Douglas-Rachford iterate.
    pub final_shadow: Option<DVector<f64>>,
}

/// Column header of the trace CSV.
pub const TRACE_CSV_HEADER: &str = "k,step_length,gap,dist_to_solution,ambiguous";

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.per_iteration.len()
    }

    pub fn last(&self) -> &IterationRecord {
        self.per_iteration.last().expect("traces are never empty")
    }

    pub fn final_gap(&self) -> f64 {
        self.last().gap_distance
    }

    pub fn ambiguity_count(&self) -> usize {
        self.per_iteration.iter().filter(|r| r.ambiguous).count()
    }

    /// The point whose distance to the intersection is monitored: the final
    /// iterate, or its shadow for Douglas-Rachford.
    pub fn solution_estimate(&self) -> &DVector<f64> {
        self.final_shadow.as_ref().unwrap_or(&self.final_point)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.per_iteration.iter().map(|r| r.gap_distance).collect()
    }

    pub fn step_lengths(&self) -> Vec<f64> {
        self.per_iteration.iter().map(|r| r.step_length).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.per_iteration.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.per_iteration {
            let dist = r.distance_to_solution.map(|d| format!("{d:e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{}",
                r.k,
                r.step_length,
                r.gap_distance,
                dist,
                u8::from(r.ambiguous)
            );
        }
        out
    }

    /// One row per stored iterate: `k,x_1,...,x_n`.
    pub fn iterates_csv(&self) -> Option<String> {
        let iterates = self.iterates.as_ref()?;
        let n = self.final_point.len();
        let mut out = String::from("k");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (k, x) in iterates.iter().enumerate() {
            let _ = write!(out, "{k}");
            for v in x.iter() {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        Some(out)
    }
}
