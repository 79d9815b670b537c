use serde::{Deserialize, Serialize};

use super::trace::IterationTrace;
use crate::diagnostics::RipReport;
use crate::error::{Error, Result};

/// Hypotheses on `mu` are checked to this absolute tolerance.
const HYPOTHESIS_TOL: f64 = 1e-9;

/// Minimum number of iterations `estimate_rate` accepts.
pub const MIN_RATE_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Gap,
    Distance,
    Objective,
}

/// Least-squares line through `(k, ln v_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    /// `exp(slope)`: the per-iteration contraction factor.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln values[i]` against `i`. Every value must be positive.
pub fn log_linear_fit(values: &[f64]) -> Result<LogLinearFit> {
    if values.len() < 2 {
        return Err(Error::TooFewIterations {
            available: values.len(),
            required: 2,
        });
    }
    if let Some(i) = values.iter().position(|v| *v <= 0.0) {
        return Err(Error::QuantityVanished(i));
    }
    let n = values.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mean_k = (n - 1.0) / 2.0;
    let mean_y = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, y) in logs.iter().enumerate() {
        let dx = i as f64 - mean_k;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LogLinearFit {
        rate: slope.exp(),
        r_squared,
        points: values.len(),
    })
}

fn quantity_values(trace: &IterationTrace, quantity: Quantity) -> Result<Vec<f64>> {
    trace
        .per_iteration
        .iter()
        .map(|r| match quantity {
            Quantity::Gap => Ok(r.gap_distance),
            Quantity::Distance => r
                .distance_to_solution
                .ok_or_else(|| Error::RateUndefined("trace has no known solution".into())),
            Quantity::Objective => r
                .objective
                .ok_or_else(|| Error::RateUndefined("objective is only recorded by projected gradients".into())),
        })
        .collect()
}

/// Empirical per-iteration contraction factor of `quantity` over the last
/// half of the trace.
pub fn estimate_rate(trace: &IterationTrace, quantity: Quantity) -> Result<f64> {
    let values = quantity_values(trace, quantity)?;
    if values.len() < MIN_RATE_ITERATIONS {
        return Err(Error::TooFewIterations {
            available: values.len(),
            required: MIN_RATE_ITERATIONS,
        });
    }
    if let Some(i) = values.iter().position(|v| *v == 0.0) {
        return Err(Error::QuantityVanished(trace.per_iteration[i].k));
    }
    let tail = &values[values.len() / 2..];
    Ok(log_linear_fit(tail)?.rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateApplicability {
    /// `mu_2s = 1`, `M Mᵀ = I` and `nu_2s > 1/2`.
    pub ap_rate_rip: bool,
    /// `delta_2s < 1/2` for `M†M`.
    pub ap_rate_uprip: bool,
    /// `tau ∈ [mu_2s, 2 nu_2s)`.
    pub pg_rate: bool,
}

/// Predicted linear rate constants, each paired with whether its hypotheses hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    /// `1/nu_2s - 1`.
    pub ap_rate_rip: f64,
    /// `sqrt(delta_2s / (1 - delta_2s))`.
    pub ap_rate_uprip: f64,
    /// `tau/nu_2s - 1`.
    pub pg_rate: f64,
    pub applicable: RateApplicability,
}

/// Rate constants from the restricted isometry constants of order `2s`.
///
/// `rows_orthonormal` states whether `M Mᵀ = I`, which the alternating
/// projections rate derived from `nu_2s` requires.
pub fn predict_rates(rip: &RipReport, uprip_delta: f64, tau: f64, rows_orthonormal: bool) -> Result<RatePrediction> {
    if rip.nu.is_nan() || rip.nu <= 0.0 {
        return Err(Error::RateUndefined(format!(
            "nu_{} = {} (strong regularity fails)",
            rip.order, rip.nu
        )));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Config(format!("step size must be positive, got {tau}")));
    }
    let nu = rip.nu;
    let mu = rip.mu;
    let ap_rate_rip = 1.0 / nu - 1.0;
    let ap_rate_uprip = (uprip_delta / (1.0 - uprip_delta)).sqrt();
    let pg_rate = tau / nu - 1.0;
    let applicable = RateApplicability {
        ap_rate_rip: rows_orthonormal && (mu - 1.0).abs() <= HYPOTHESIS_TOL && nu > 0.5,
        ap_rate_uprip: (0.0..0.5).contains(&uprip_delta),
        pg_rate: tau >= mu - HYPOTHESIS_TOL && tau < 2.0 * nu,
    };
    Ok(RatePrediction {
        ap_rate_rip,
        ap_rate_uprip,
        pg_rate,
        applicable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::trace::{Algorithm, IterationRecord, Termination};
    use nalgebra::DVector;

    fn synthetic(values: &[f64]) -> IterationTrace {
        IterationTrace {
            algorithm: Algorithm::Ap,
            iterates: None,
            per_iteration: values
                .iter()
                .enumerate()
                .map(|(i, v)| IterationRecord {
                    k: i + 1,
                    step_length: *v,
                    gap_distance: *v,
                    distance_to_solution: Some(*v),
                    shadow: None,
                    ambiguous: false,
                    objective: None,
                })
                .collect(),
            termination: Termination::MaxIterations,
            cycle: None,
            final_point: DVector::zeros(1),
            final_shadow: None,
        }
    }

    fn rip(nu: f64, mu: f64) -> RipReport {
        RipReport {
            order: 2,
            nu,
            mu,
            delta: (1.0 - nu).max(mu - 1.0),
            witness_min: vec![0, 1],
            witness_max: vec![0, 1],
            supports_enumerated: 1,
        }
    }

    #[test]
    fn geometric_sequence_rate() {
        let values: Vec<f64> = (1..=40).map(|k| 0.5f64.powi(k)).collect();
        let rate = estimate_rate(&synthetic(&values), Quantity::Gap).unwrap();
        assert!((rate - 0.5).abs() < 1e-9, "{rate}");
    }

    #[test]
    fn constant_sequence_has_unit_rate() {
        let rate = estimate_rate(&synthetic(&[3.0; 10]), Quantity::Distance).unwrap();
        assert!((rate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rate_errors() {
        assert!(matches!(
            estimate_rate(&synthetic(&[1.0, 0.5, 0.25]), Quantity::Gap),
            Err(Error::TooFewIterations { .. })
        ));
        assert!(matches!(
            estimate_rate(&synthetic(&[1.0, 0.5, 0.25, 0.0, 0.0, 0.0]), Quantity::Gap),
            Err(Error::QuantityVanished(4))
        ));
        assert!(matches!(
            estimate_rate(&synthetic(&[1.0; 6]), Quantity::Objective),
            Err(Error::RateUndefined(_))
        ));
    }

    #[test]
    fn fit_quality() {
        let fit = log_linear_fit(&[1.0, 0.1, 0.01, 0.001]).unwrap();
        assert!((fit.rate - 0.1).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let noisy = log_linear_fit(&[1.0, 0.01, 0.5, 0.001, 0.3]).unwrap();
        assert!(noisy.r_squared < 0.9);
    }

    #[test]
    fn predictions() {
        let p = predict_rates(&rip(0.75, 1.0), 0.2, 1.0, true).unwrap();
        assert!((p.ap_rate_rip - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.ap_rate_uprip - 0.5).abs() < 1e-15);
        assert!((p.pg_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!(p.applicable.ap_rate_rip && p.applicable.ap_rate_uprip && p.applicable.pg_rate);

        let iso = predict_rates(&rip(1.0, 1.0), 0.0, 1.0, true).unwrap();
        assert_eq!(iso.ap_rate_rip, 0.0);

        let off = predict_rates(&rip(0.75, 1.0), 0.6, 1.6, false).unwrap();
        assert!(!off.applicable.ap_rate_rip && !off.applicable.ap_rate_uprip && !off.applicable.pg_rate);

        assert!(matches!(predict_rates(&rip(0.0, 1.0), 0.2, 1.0, true), Err(Error::RateUndefined(_))));
    }
}
