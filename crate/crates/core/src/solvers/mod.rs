//! Fixed-point iterations for sparse affine feasibility.
//!
//! All three solvers select the canonical (lexicographically smallest) sparse
//! projection and flag iterations where the projection was multivalued.

mod rates;
mod trace;

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use rates::{estimate_rate, log_linear_fit, predict_rates, LogLinearFit, Quantity, RateApplicability, RatePrediction};
pub use trace::{Algorithm, Cycle, IterationRecord, IterationTrace, Termination, TRACE_CSV_HEADER};

use crate::error::{check_len, Error, Result};
use crate::projectors::{affine_projection, all_sparse_images, canonical_sparse};
use crate::types::FeasibilityProblem;

/// Relative tolerance for matching an iterate against an earlier one.
pub const CYCLE_MATCH_TOL: f64 = 1e-9;

/// Consecutive members of a detected cycle must be at least this far apart
/// (relative), so slowly converging sequences are not mistaken for cycles.
pub const CYCLE_SEPARATION: f64 = 1e-6;

/// Bound on the number of points explored when closing a multivalued cycle.
const MAX_CYCLE_MEMBERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gap_tol: f64,
    pub step_tol: f64,
    pub cycle_detection: bool,
    pub cycle_window: usize,
    pub store_iterates: bool,
    /// Step size `tau` of projected gradients; the gradient step is `1/tau`.
    pub step_size: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            gap_tol: 1e-10,
            step_tol: 1e-14,
            cycle_detection: true,
            cycle_window: 8,
            store_iterates: false,
            step_size: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("gap_tol", self.gap_tol),
            ("step_tol", self.step_tol),
            ("step_size", self.step_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.cycle_detection && self.cycle_window < 1 {
            return Err(Error::Config("cycle_window must be at least 1".into()));
        }
        Ok(())
    }
}

fn scale(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.norm().max(b.norm()).max(1.0)
}

fn same_point(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    (a - b).norm() <= CYCLE_MATCH_TOL * scale(a, b)
}

fn well_separated(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    (a - b).norm() > CYCLE_SEPARATION * scale(a, b)
}

/// Bookkeeping shared by the three iterations: records, stopping rules and
/// cycle detection.
struct Monitor<'a> {
    problem: &'a FeasibilityProblem,
    config: &'a SolverConfig,
    algorithm: Algorithm,
    records: Vec<IterationRecord>,
    iterates: Option<Vec<DVector<f64>>>,
    recent: VecDeque<DVector<f64>>,
    cycle: Option<Cycle>,
}

struct Step<'v> {
    next: &'v DVector<f64>,
    gap: f64,
    shadow: Option<&'v DVector<f64>>,
    ambiguous: bool,
    objective: Option<f64>,
}

impl<'a> Monitor<'a> {
    fn new(problem: &'a FeasibilityProblem, config: &'a SolverConfig, algorithm: Algorithm, x0: &DVector<f64>) -> Self {
        let mut recent = VecDeque::with_capacity(config.cycle_window + 1);
        recent.push_back(x0.clone());
        Self {
            problem,
            config,
            algorithm,
            records: Vec::new(),
            iterates: config.store_iterates.then(|| vec![x0.clone()]),
            recent,
            cycle: None,
        }
    }

    /// Records `x^k` and decides whether to stop. `images` enumerates every
    /// image of a point under the set-valued operator.
    fn observe(
        &mut self,
        prev: &DVector<f64>,
        step: Step<'_>,
        images: impl Fn(&DVector<f64>) -> Vec<DVector<f64>>,
    ) -> Option<Termination> {
        let k = self.records.len() + 1;
        let step_length = (step.next - prev).norm();
        let tracked = step.shadow.unwrap_or(step.next);
        let distance_to_solution = self.problem.known_solution.as_ref().map(|s| (tracked - s).norm());
        self.records.push(IterationRecord {
            k,
            step_length,
            gap_distance: step.gap,
            distance_to_solution,
            shadow: step.shadow.filter(|_| self.config.store_iterates).cloned(),
            ambiguous: step.ambiguous,
            objective: step.objective,
        });
        if let Some(it) = self.iterates.as_mut() {
            it.push(step.next.clone());
        }

        let verdict = if step.gap <= self.config.gap_tol {
            Some(Termination::Converged)
        } else if self.config.cycle_detection && step_length > self.config.step_tol && self.periodic(step.next) {
            Some(Termination::CycleDetected)
        } else if step_length <= self.config.step_tol {
            if self.config.cycle_detection && step.ambiguous && self.multivalued_cycle(step.next, &images) {
                Some(Termination::CycleDetected)
            } else {
                Some(Termination::Stalled)
            }
        } else {
            None
        };

        if self.config.cycle_detection {
            self.recent.push_back(step.next.clone());
            while self.recent.len() > self.config.cycle_window {
                self.recent.pop_front();
            }
        }
        verdict
    }

    /// Smallest `p >= 2` with `x^k == x^{k-p}` inside the window, where the
    /// `p` points in between are well separated from their successors.
    fn periodic(&mut self, next: &DVector<f64>) -> bool {
        let len = self.recent.len();
        for period in 2..=len.min(self.config.cycle_window) {
            if !same_point(next, &self.recent[len - period]) {
                continue;
            }
            let mut members: Vec<DVector<f64>> = self.recent.iter().skip(len - period + 1).cloned().collect();
            members.push(next.clone());
            let separated = std::iter::once(&self.recent[len - period])
                .chain(members.iter())
                .zip(members.iter())
                .all(|(a, b)| well_separated(a, b));
            if separated {
                self.cycle = Some(Cycle { period, members });
                return true;
            }
        }
        false
    }

    /// At a fixed point of the canonical selection, checks whether the other
    /// selections form a finite invariant orbit of more than one point.
    fn multivalued_cycle(&mut self, x: &DVector<f64>, images: &impl Fn(&DVector<f64>) -> Vec<DVector<f64>>) -> bool {
        let mut members = vec![x.clone()];
        let mut cursor = 0;
        while cursor < members.len() {
            for y in images(&members[cursor]) {
                if !members.iter().any(|m| same_point(m, &y)) {
                    if members.len() == MAX_CYCLE_MEMBERS {
                        return false;
                    }
                    members.push(y);
                }
            }
            cursor += 1;
        }
        if members.len() < 2 {
            return false;
        }
        self.cycle = Some(Cycle {
            period: members.len(),
            members,
        });
        true
    }

    fn finish(
        self,
        termination: Termination,
        final_point: DVector<f64>,
        final_shadow: Option<DVector<f64>>,
    ) -> IterationTrace {
        IterationTrace {
            algorithm: self.algorithm,
            iterates: self.iterates,
            per_iteration: self.records,
            termination,
            cycle: self.cycle,
            final_point,
            final_shadow,
        }
    }
}

fn check_inputs(problem: &FeasibilityProblem, x0: &DVector<f64>, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    check_len(problem.dim(), x0.len())
}

/// Alternating projections `x^{k+1} = P_{A_s} P_B x^k`.
pub fn run_alternating_projections(
    problem: &FeasibilityProblem,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<IterationTrace> {
    check_inputs(problem, x0, config)?;
    let s = problem.sparsity_level();
    let affine = &problem.affine;
    let images = |x: &DVector<f64>| all_sparse_images(&affine_projection(affine, x), s, MAX_CYCLE_MEMBERS);

    let mut monitor = Monitor::new(problem, config, Algorithm::Ap, x0);
    let mut x = x0.clone();
    let mut pb = affine_projection(affine, &x);
    let mut termination = Termination::MaxIterations;
    for _ in 0..config.max_iterations {
        let (next, ambiguous) = canonical_sparse(&pb, s);
        let pb_next = affine_projection(affine, &next);
        let gap = (&next - &pb_next).norm();
        let step = Step {
            next: &next,
            gap,
            shadow: None,
            ambiguous,
            objective: None,
        };
        let verdict = monitor.observe(&x, step, images);
        x = next;
        pb = pb_next;
        if let Some(t) = verdict {
            termination = t;
            break;
        }
    }
    Ok(monitor.finish(termination, x, None))
}

/// Douglas-Rachford `x^{k+1} = (R_{A_s} R_B x^k + x^k) / 2`; convergence is
/// judged on the shadow `P_B x^k`.
pub fn run_douglas_rachford(
    problem: &FeasibilityProblem,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<IterationTrace> {
    check_inputs(problem, x0, config)?;
    let s = problem.sparsity_level();
    let affine = &problem.affine;
    let images = |x: &DVector<f64>| {
        let rb = 2.0 * affine_projection(affine, x) - x;
        all_sparse_images(&rb, s, MAX_CYCLE_MEMBERS)
            .into_iter()
            .map(|pa| 0.5 * (2.0 * pa - &rb + x))
            .collect()
    };

    let mut monitor = Monitor::new(problem, config, Algorithm::Dr, x0);
    let mut x = x0.clone();
    let mut pb = affine_projection(affine, &x);
    let mut termination = Termination::MaxIterations;
    for _ in 0..config.max_iterations {
        let rb = 2.0 * &pb - &x;
        let (pa, ambiguous) = canonical_sparse(&rb, s);
        let ra = 2.0 * pa - &rb;
        let next = 0.5 * (ra + &x);
        let pb_next = affine_projection(affine, &next);
        let (shadow_sparse, _) = canonical_sparse(&pb_next, s);
        let gap = (shadow_sparse - &pb_next).norm();
        let step = Step {
            next: &next,
            gap,
            shadow: Some(&pb_next),
            ambiguous,
            objective: None,
        };
        let verdict = monitor.observe(&x, step, images);
        x = next;
        pb = pb_next;
        if let Some(t) = verdict {
            termination = t;
            break;
        }
    }
    Ok(monitor.finish(termination, x, Some(pb)))
}

/// Projected gradients (iterative hard thresholding) on
/// `f(x) = ||Mx - p||^2 / 2`: `x^{k+1} = P_{A_s}(x^k - M^T(M x^k - p) / tau)`.
pub fn run_projected_gradient(
    problem: &FeasibilityProblem,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<IterationTrace> {
    check_inputs(problem, x0, config)?;
    let s = problem.sparsity_level();
    let affine = &problem.affine;
    let matrix = affine.matrix();
    let inv_tau = 1.0 / config.step_size;
    let gradient_step = |x: &DVector<f64>, residual: &DVector<f64>| x - inv_tau * matrix.tr_mul(residual);
    let images = |x: &DVector<f64>| all_sparse_images(&gradient_step(x, &affine.residual(x)), s, MAX_CYCLE_MEMBERS);

    let mut monitor = Monitor::new(problem, config, Algorithm::Pg, x0);
    let mut x = x0.clone();
    let mut residual = affine.residual(&x);
    let mut termination = Termination::MaxIterations;
    for _ in 0..config.max_iterations {
        let (next, ambiguous) = canonical_sparse(&gradient_step(&x, &residual), s);
        let residual_next = affine.residual(&next);
        let objective = 0.5 * residual_next.norm_squared();
        let gap = matrix.tr_mul(&affine.solve_gram(&residual_next)).norm();
        let step = Step {
            next: &next,
            gap,
            shadow: None,
            ambiguous,
            objective: Some(objective),
        };
        let verdict = monitor.observe(&x, step, images);
        x = next;
        residual = residual_next;
        if let Some(t) = verdict {
            termination = t;
            break;
        }
    }
    Ok(monitor.finish(termination, x, None))
}

/// Dispatches on `algorithm`.
pub fn run(
    algorithm: Algorithm,
    problem: &FeasibilityProblem,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<IterationTrace> {
    match algorithm {
        Algorithm::Ap => run_alternating_projections(problem, x0, config),
        Algorithm::Dr => run_douglas_rachford(problem, x0, config),
        Algorithm::Pg => run_projected_gradient(problem, x0, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn pathological() -> FeasibilityProblem {
        FeasibilityProblem::from_parts(
            dmatrix![1.0, -0.5, 0.0; 0.0, 0.5, -1.0],
            dvector![-5.0, 5.0],
            1,
            Some(dvector![0.0, 10.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig {
                max_iterations: 0,
                ..Default::default()
            },
            SolverConfig {
                gap_tol: 0.0,
                ..Default::default()
            },
            SolverConfig {
                step_tol: -1.0,
                ..Default::default()
            },
            SolverConfig {
                step_size: f64::NAN,
                ..Default::default()
            },
            SolverConfig {
                cycle_window: 0,
                ..Default::default()
            },
        ];
        let problem = pathological();
        for config in bad {
            assert!(matches!(
                run_alternating_projections(&problem, &DVector::zeros(3), &config),
                Err(Error::Config(_))
            ));
        }
        assert!(matches!(
            run_douglas_rachford(&problem, &DVector::zeros(2), &SolverConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solution_start_converges_immediately() {
        let problem = pathological();
        let x0 = problem.known_solution.clone().unwrap();
        for alg in [Algorithm::Ap, Algorithm::Dr, Algorithm::Pg] {
            let trace = run(alg, &problem, &x0, &SolverConfig::default()).unwrap();
            assert_eq!(trace.termination, Termination::Converged, "{alg:?}");
            assert_eq!(trace.iterations(), 1);
            assert!(trace.per_iteration[0].step_length < 1e-14);
        }
    }

    #[test]
    fn ap_sticks_on_tied_pair() {
        let problem = pathological();
        let trace = run_alternating_projections(&problem, &dvector![-4.0, 0.0, 0.0], &SolverConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::CycleDetected);
        let cycle = trace.cycle.as_ref().unwrap();
        assert_eq!(cycle.period, 2);
        assert_eq!(cycle.members[0], dvector![-4.0, 0.0, 0.0]);
        assert!((&cycle.members[1] - dvector![0.0, 0.0, -4.0]).norm() < 1e-12);
        assert!(trace.per_iteration.iter().all(|r| r.ambiguous));
    }

    #[test]
    fn ap_without_cycle_detection_stalls() {
        let problem = pathological();
        let config = SolverConfig {
            cycle_detection: false,
            ..Default::default()
        };
        let trace = run_alternating_projections(&problem, &dvector![-4.0, 0.0, 0.0], &config).unwrap();
        assert_eq!(trace.termination, Termination::Stalled);
        assert!(trace.cycle.is_none());
    }

    #[test]
    fn max_iterations_is_reported() {
        let problem = pathological();
        let config = SolverConfig {
            max_iterations: 3,
            cycle_detection: false,
            ..Default::default()
        };
        let trace = run_douglas_rachford(&problem, &dvector![3.0, 1.0, -2.0], &config).unwrap();
        assert!(trace.iterations() <= 3);
        assert!(!trace.per_iteration.is_empty());
    }

    #[test]
    fn pg_first_step_from_origin() {
        let problem = pathological();
        let config = SolverConfig {
            max_iterations: 1,
            step_size: 2.0,
            store_iterates: true,
            ..Default::default()
        };
        let trace = run_projected_gradient(&problem, &DVector::zeros(3), &config).unwrap();
        let m = problem.affine.matrix();
        let step = m.tr_mul(problem.affine.rhs()) / 2.0;
        // Mᵀp / 2 = (-2.5, 2.5, -2.5): three tied magnitudes, the first is kept.
        assert_eq!(step, dvector![-2.5, 2.5, -2.5]);
        let x1 = &trace.iterates.as_ref().unwrap()[1];
        assert_eq!(*x1, dvector![-2.5, 0.0, 0.0]);
        assert!(trace.per_iteration[0].ambiguous);
        let f = trace.per_iteration[0].objective.unwrap();
        assert!((f - 0.5 * (problem.affine.residual(x1)).norm_squared()).abs() < 1e-14);
    }

    #[test]
    fn stored_iterates_include_start() {
        let problem = pathological();
        let config = SolverConfig {
            max_iterations: 5,
            store_iterates: true,
            cycle_detection: false,
            ..Default::default()
        };
        let trace = run_douglas_rachford(&problem, &dvector![1.0, 2.0, 3.0], &config).unwrap();
        let it = trace.iterates.as_ref().unwrap();
        assert_eq!(it.len(), trace.iterations() + 1);
        assert_eq!(it[0], dvector![1.0, 2.0, 3.0]);
        assert!(trace.per_iteration.iter().all(|r| r.shadow.is_some()));
        let csv = trace.to_csv();
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        assert_eq!(csv.lines().count(), trace.iterations() + 1);
    }
}
