//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use sparsefeas::rng::SplitMix64;

pub fn random_matrix(rng: &mut SplitMix64, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.normal())
}

pub fn random_vector(rng: &mut SplitMix64, n: usize, radius: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.symmetric(radius))
}

/// Nearest point of `{y | My = p}` from the KKT system
/// `[I Mᵀ; M 0] [y; λ] = [x; p]`, solved by LU.
pub fn kkt_projection(m: &DMatrix<f64>, p: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let (rows, n) = m.shape();
    let mut k = DMatrix::zeros(n + rows, n + rows);
    k.view_mut((0, 0), (n, n)).fill_with_identity();
    k.view_mut((0, n), (n, rows)).copy_from(&m.transpose());
    k.view_mut((n, 0), (rows, n)).copy_from(m);
    let mut rhs = DVector::zeros(n + rows);
    rhs.rows_mut(0, n).copy_from(x);
    rhs.rows_mut(n, rows).copy_from(p);
    let sol = k.lu().solve(&rhs).expect("KKT matrix is nonsingular");
    sol.rows(0, n).into_owned()
}

/// `min_J ||x - x_J||` over every support of size `s`, by enumeration.
pub fn brute_sparse_distance(x: &DVector<f64>, s: usize) -> f64 {
    let n = x.len();
    let total: f64 = x.iter().map(|v| v * v).sum();
    (0..n)
        .combinations(s)
        .map(|j| total - j.iter().map(|&i| x[i] * x[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .sqrt()
}

/// Every support of size `s` attaining the brute-force optimum within `tol`.
pub fn brute_optimal_supports(x: &DVector<f64>, s: usize, tol: f64) -> Vec<Vec<usize>> {
    let kept = |j: &Vec<usize>| j.iter().map(|&i| x[i] * x[i]).sum::<f64>();
    let all: Vec<Vec<usize>> = (0..x.len()).combinations(s).collect();
    let best = all.iter().map(kept).fold(f64::NEG_INFINITY, f64::max);
    all.into_iter().filter(|j| kept(j) >= best - tol).collect()
}

pub fn columns(m: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), support.len(), |i, j| m[(i, support[j])])
}

/// Numerical rank from singular values.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    sv.iter().filter(|v| **v > rel_tol * max.max(1e-300)).count()
}

/// Cosines of the principal angles between the column spans of two matrices
/// with orthonormal columns.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = (a.transpose() * b).singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}
