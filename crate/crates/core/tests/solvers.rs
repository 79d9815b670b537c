mod common;

use itertools::Itertools;
use nalgebra::DVector;
use proptest::prelude::*;
use sparsefeas::diagnostics::dr_fixed_point_set;
use sparsefeas::problems::{build, perturb_start, GeneratorKind, GeneratorSpec};
use sparsefeas::rng::SplitMix64;
use sparsefeas::solvers::{
    estimate_rate, run, run_douglas_rachford, Algorithm, Quantity, SolverConfig, Termination, TRACE_CSV_HEADER,
};
use sparsefeas::{Error, FeasibilityProblem};

use common::{kkt_projection, random_vector};

fn hadamard() -> FeasibilityProblem {
    build(&GeneratorSpec::builtin(GeneratorKind::Hadamard7x8)).unwrap()
}

/// Sparse projection by sorting magnitudes, valid when there are no ties.
fn sort_projection(x: &DVector<f64>, s: usize) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for i in (0..x.len()).sorted_by(|&a, &b| x[b].abs().partial_cmp(&x[a].abs()).unwrap()).take(s) {
        out[i] = x[i];
    }
    out
}

fn stored(max_iterations: usize) -> SolverConfig {
    SolverConfig {
        max_iterations,
        store_iterates: true,
        ..SolverConfig::default()
    }
}

#[test]
fn iterations_match_independent_operators() {
    let problem = build(&GeneratorSpec::random(GeneratorKind::Gaussian, 5, 12, 2, 3)).unwrap();
    let m = problem.affine.matrix().clone();
    let p = problem.affine.rhs().clone();
    let s = 2;
    let mut rng = SplitMix64::new(4);
    let x0 = random_vector(&mut rng, 12, 10.0);
    let config = SolverConfig {
        cycle_detection: false,
        ..stored(30)
    };

    let ap = run(Algorithm::Ap, &problem, &x0, &config).unwrap();
    let mut x = x0.clone();
    for (k, (xk, rec)) in ap.iterates.as_ref().unwrap().iter().skip(1).zip(&ap.per_iteration).enumerate() {
        let next = sort_projection(&kkt_projection(&m, &p, &x), s);
        assert!((xk - &next).norm() <= 1e-9 * next.norm().max(1.0), "AP step {k}");
        let gap = (&next - kkt_projection(&m, &p, &next)).norm();
        assert!((rec.gap_distance - gap).abs() <= 1e-9);
        assert!((rec.step_length - (&next - &x).norm()).abs() <= 1e-9);
        x = next;
    }

    let dr = run(Algorithm::Dr, &problem, &x0, &config).unwrap();
    let mut x = x0.clone();
    for (xk, rec) in dr.iterates.as_ref().unwrap().iter().skip(1).zip(&dr.per_iteration) {
        let rb = 2.0 * kkt_projection(&m, &p, &x) - &x;
        let ra = 2.0 * sort_projection(&rb, s) - &rb;
        let next = 0.5 * (ra + &x);
        assert!((xk - &next).norm() <= 1e-9 * next.norm().max(1.0));
        let shadow = kkt_projection(&m, &p, &next);
        let gap = (sort_projection(&shadow, s) - &shadow).norm();
        assert!((rec.gap_distance - gap).abs() <= 1e-9);
        x = next;
    }

    let tau = 2.5;
    let pg_config = SolverConfig {
        step_size: tau,
        ..config
    };
    let pg = run(Algorithm::Pg, &problem, &x0, &pg_config).unwrap();
    let mut x = x0.clone();
    for (xk, rec) in pg.iterates.as_ref().unwrap().iter().skip(1).zip(&pg.per_iteration) {
        let next = sort_projection(&(&x - m.transpose() * (&m * &x - &p) / tau), s);
        assert!((xk - &next).norm() <= 1e-9 * next.norm().max(1.0));
        let f = 0.5 * (&m * &next - &p).norm_squared();
        assert!((rec.objective.unwrap() - f).abs() <= 1e-9 * f.max(1.0));
        x = next;
    }
}

#[test]
fn local_starts_converge_on_the_hadamard_instance() {
    let problem = hadamard();
    let xbar = problem.known_solution.clone().unwrap();
    for seed in 0..20 {
        let start = perturb_start(&problem, 1.0, seed).unwrap();
        for alg in [Algorithm::Ap, Algorithm::Dr, Algorithm::Pg] {
            let trace = run(alg, &problem, &start.point, &SolverConfig::default()).unwrap();
            assert_eq!(trace.termination, Termination::Converged, "{alg:?} seed {seed}");
            assert!((trace.solution_estimate() - &xbar).norm() <= 1e-8, "{alg:?} seed {seed}");
        }
    }
}

#[test]
fn dr_iterates_approach_a_fixed_point_off_the_intersection() {
    // The shadows converge to the solution while the iterates settle at a
    // fixed point of the restricted operator that is not a solution.
    let problem = hadamard();
    let xbar = problem.known_solution.clone().unwrap();
    let fix = dr_fixed_point_set(&problem.affine, &[0]).unwrap();
    assert_eq!(fix.orthogonal_dim(), 6);
    let config = SolverConfig {
        gap_tol: 1e-13,
        ..SolverConfig::default()
    };
    let mut off_intersection = 0;
    for seed in 0..10 {
        let start = perturb_start(&problem, 1.0, 40 + seed).unwrap();
        let trace = run_douglas_rachford(&problem, &start.point, &config).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!((trace.final_shadow.as_ref().unwrap() - &xbar).norm() <= 1e-10);
        assert!(fix.distance(&trace.final_point) <= 1e-8);
        if (&trace.final_point - &xbar).norm() > 1e-2 {
            off_intersection += 1;
        }
    }
    assert!(off_intersection > 0);
}

#[test]
fn traces_are_deterministic() {
    let problem = build(&GeneratorSpec::random(GeneratorKind::RowOrthonormal, 6, 20, 2, 9)).unwrap();
    let x0 = random_vector(&mut SplitMix64::new(1), 20, 5.0);
    for alg in [Algorithm::Ap, Algorithm::Dr, Algorithm::Pg] {
        let a = run(alg, &problem, &x0, &stored(200)).unwrap();
        let b = run(alg, &problem, &x0, &stored(200)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.iterates, b.iterates);
    }
}

#[test]
fn csv_has_one_row_per_iteration() {
    let problem = hadamard();
    let x0 = perturb_start(&problem, 50.0, 3).unwrap().point;
    let trace = run(Algorithm::Ap, &problem, &x0, &SolverConfig::default()).unwrap();
    let csv = trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), trace.iterations());
    for (row, rec) in rows.iter().zip(&trace.per_iteration) {
        assert_eq!(row.len(), 5);
        assert_eq!(row[0].parse::<usize>().unwrap(), rec.k);
        assert_eq!(row[1].parse::<f64>().unwrap(), rec.step_length);
        assert_eq!(row[2].parse::<f64>().unwrap(), rec.gap_distance);
        assert_eq!(row[3].parse::<f64>().unwrap(), rec.distance_to_solution.unwrap());
        assert_eq!(row[4], if rec.ambiguous { "1" } else { "0" });
    }
}

#[test]
fn iteration_budget_and_stored_iterates() {
    let problem = build(&GeneratorSpec::random(GeneratorKind::Gaussian, 12, 30, 3, 2)).unwrap();
    let x0 = random_vector(&mut SplitMix64::new(2), 30, 50.0);
    let trace = run(Algorithm::Dr, &problem, &x0, &stored(7)).unwrap();
    assert_eq!(trace.termination, Termination::MaxIterations);
    assert_eq!(trace.iterations(), 7);
    let iterates = trace.iterates.as_ref().unwrap();
    assert_eq!(iterates.len(), 8);
    assert_eq!(iterates[0], x0);
    assert_eq!(iterates[7], trace.final_point);
    assert!(trace.per_iteration.iter().all(|r| r.shadow.is_some()));
}

#[test]
fn invalid_inputs_are_rejected() {
    let problem = hadamard();
    let short = DVector::zeros(3);
    assert!(matches!(
        run(Algorithm::Ap, &problem, &short, &SolverConfig::default()),
        Err(Error::DimensionMismatch { expected: 8, actual: 3 })
    ));
    let x0 = DVector::zeros(8);
    for bad in [
        SolverConfig { max_iterations: 0, ..SolverConfig::default() },
        SolverConfig { gap_tol: -1.0, ..SolverConfig::default() },
        SolverConfig { step_size: 0.0, ..SolverConfig::default() },
        SolverConfig { step_tol: f64::NAN, ..SolverConfig::default() },
    ] {
        assert!(matches!(run(Algorithm::Pg, &problem, &x0, &bad), Err(Error::Config(_))));
    }
}

#[test]
fn gap_rate_of_local_ap_is_below_one() {
    let problem = build(&GeneratorSpec::random(GeneratorKind::RowOrthonormal, 10, 24, 2, 5)).unwrap();
    let start = perturb_start(&problem, 0.1, 6).unwrap();
    let trace = run(Algorithm::Ap, &problem, &start.point, &SolverConfig::default()).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let rate = estimate_rate(&trace, Quantity::Gap).unwrap();
    assert!(rate < 1.0);
    let dist_rate = estimate_rate(&trace, Quantity::Distance).unwrap();
    assert!(dist_rate < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iterate_invariants(seed in any::<u64>(), start_seed in any::<u64>()) {
        let problem = build(&GeneratorSpec::random(GeneratorKind::Gaussian, 4, 10, 2, seed)).unwrap();
        let x0 = random_vector(&mut SplitMix64::new(start_seed), 10, 20.0);
        let config = stored(40);
        let ap = run(Algorithm::Ap, &problem, &x0, &config).unwrap();
        for x in ap.iterates.as_ref().unwrap().iter().skip(1) {
            prop_assert!(problem.sparsity.contains(x));
        }
        let dr = run(Algorithm::Dr, &problem, &x0, &config).unwrap();
        for r in &dr.per_iteration {
            let shadow = r.shadow.as_ref().unwrap();
            prop_assert!(problem.affine.residual(shadow).norm() <= 1e-9 * (1.0 + shadow.norm()));
        }
        let pg = run(Algorithm::Pg, &problem, &x0, &config).unwrap();
        prop_assert!(pg.iterates.as_ref().unwrap().iter().skip(1).all(|x| problem.sparsity.contains(x)));
        for trace in [&ap, &dr, &pg] {
            prop_assert!(trace.iterations() >= 1 && trace.iterations() <= 40);
            prop_assert!(trace.per_iteration.iter().all(|r| r.gap_distance >= 0.0 && r.step_length >= 0.0));
            if trace.termination == Termination::CycleDetected {
                prop_assert!(trace.cycle.as_ref().unwrap().period >= 2);
            }
        }
    }
}
