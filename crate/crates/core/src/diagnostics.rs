//! Checks of the regularity hypotheses behind the convergence guarantees, by
//! exhaustive enumeration of coordinate supports.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::projectors::{affine_reflection, binomial, restrict};
use crate::types::{AffineSet, IndexSet};

/// Default bound on `C(n, order)` for enumerating diagnostics.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

/// Relative singular-value threshold for deciding that a subspace
/// intersection is trivial.
pub const SV_TOL: f64 = 1e-8;

/// Principal cosines this close to one are treated as a shared direction.
pub const INTERSECTION_TOL: f64 = 1e-10;

pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Restricted isometry constants of one order, with the supports attaining them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub order: usize,
    /// `min ||Mx||^2 / ||x||^2` over `order`-sparse `x`.
    pub nu: f64,
    /// `max ||Mx||^2 / ||x||^2` over `order`-sparse `x`.
    pub mu: f64,
    /// `max(1 - nu, mu - 1)`.
    pub delta: f64,
    pub witness_min: IndexSet,
    pub witness_max: IndexSet,
    pub supports_enumerated: u64,
}

fn enumeration_size(n: usize, order: usize, cap: u128) -> Result<u64> {
    if order == 0 || order > n {
        return Err(Error::Config(format!("order must lie in 1..={n}, got {order}")));
    }
    let count = binomial(n, order);
    if count > cap {
        return Err(Error::EnumerationTooLarge { n, order, count, cap });
    }
    Ok(count as u64)
}

fn supports(n: usize, order: usize) -> impl Iterator<Item = IndexSet> {
    (0..n).combinations(order)
}

fn columns(matrix: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    matrix.select_columns(support.iter())
}

/// Extreme eigenvalues of `Aᵀ A` for a tall column block `A`.
fn gram_extremes(block: &DMatrix<f64>) -> (f64, f64) {
    let eig = block.tr_mul(block).symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// `nu`, `mu` and `delta` of `M` at the given order, enumerating every support
/// in lexicographic order. Ties keep the first support found.
pub fn rip_constants(matrix: &DMatrix<f64>, order: usize, cap: u128) -> Result<RipReport> {
    let count = enumeration_size(matrix.ncols(), order, cap)?;
    let mut nu = f64::INFINITY;
    let mut mu = f64::NEG_INFINITY;
    let mut witness_min = Vec::new();
    let mut witness_max = Vec::new();
    for support in supports(matrix.ncols(), order) {
        let (lo, hi) = gram_extremes(&columns(matrix, &support));
        if lo < nu {
            nu = lo;
            witness_min = support.clone();
        }
        if hi > mu {
            mu = hi;
            witness_max = support;
        }
    }
    let nu = nu.max(0.0);
    Ok(RipReport {
        order,
        nu,
        mu,
        delta: (1.0 - nu).max(mu - 1.0),
        witness_min,
        witness_max,
        supports_enumerated: count,
    })
}

/// Smallest `delta` with `(1 - delta)||x||^2 <= ||M†M x||^2` for all
/// `order`-sparse `x`.
///
/// With `W = L⁻¹ M` for the Cholesky factor `L` of `M Mᵀ`, the Gram matrix of
/// the columns `J` of the projector `M†M` is `W_Jᵀ W_J`, so only order x order
/// matrices are decomposed.
pub fn uprip_delta(set: &AffineSet, order: usize, cap: u128) -> Result<f64> {
    Ok(uprip_report(set, order, cap)?.delta)
}

/// Full report for `M†M`; `mu <= 1` holds automatically.
pub fn uprip_report(set: &AffineSet, order: usize, cap: u128) -> Result<RipReport> {
    let count = enumeration_size(set.dim(), order, cap)?;
    let whitened = set
        .gram_factor()
        .solve_lower_triangular(set.matrix())
        .ok_or_else(|| Error::Config("Cholesky factor is singular".into()))?;
    let mut nu = f64::INFINITY;
    let mut mu = f64::NEG_INFINITY;
    let mut witness_min = Vec::new();
    let mut witness_max = Vec::new();
    for support in supports(set.dim(), order) {
        let (lo, hi) = gram_extremes(&columns(&whitened, &support));
        if lo < nu {
            nu = lo;
            witness_min = support.clone();
        }
        if hi > mu {
            mu = hi;
            witness_max = support;
        }
    }
    let nu = nu.clamp(0.0, 1.0);
    Ok(RipReport {
        order,
        nu,
        mu: mu.min(1.0),
        delta: 1.0 - nu,
        witness_min,
        witness_max,
        supports_enumerated: count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongRegularityReport {
    /// `A_J ∩ ker M = {0}` for every support of the order.
    pub holds: bool,
    pub worst_support: IndexSet,
    /// Smallest singular value of `M_J` over all supports.
    pub min_singular: f64,
    /// `SV_TOL` times the largest singular value of `M`.
    pub threshold: f64,
    pub supports_enumerated: u64,
}

/// Smallest singular value of a column block, zero when it has more columns than rows.
fn min_singular_value(block: &DMatrix<f64>) -> f64 {
    if block.ncols() > block.nrows() {
        return 0.0;
    }
    block.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn check_strong_regularity(set: &AffineSet, order: usize, cap: u128) -> Result<StrongRegularityReport> {
    let count = enumeration_size(set.dim(), order, cap)?;
    let threshold = SV_TOL * set.singular_value_range().1;
    let mut min_singular = f64::INFINITY;
    let mut worst_support = Vec::new();
    for support in supports(set.dim(), order) {
        let sv = min_singular_value(&columns(set.matrix(), &support));
        if sv < min_singular {
            min_singular = sv;
            worst_support = support;
        }
    }
    Ok(StrongRegularityReport {
        holds: min_singular > threshold,
        worst_support,
        min_singular,
        threshold,
        supports_enumerated: count,
    })
}

/// Orthonormal basis of `{z | a z = 0}` using singular values above
/// `threshold` as the numerical rank. Short matrices are padded with zero rows
/// so the decomposition returns a complete right factor.
fn right_null_space(a: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v = svd.v_t.expect("requested").transpose();
    let null: Vec<usize> = (0..c).filter(|&i| svd.singular_values[i] <= threshold).collect();
    v.select_columns(null.iter())
}

/// Orthonormal basis of the column span of `a` (assumed full column rank),
/// with each column's first significant entry made positive.
fn orthonormalize(a: DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return a;
    }
    let mut q = a.qr().q();
    for mut col in q.column_iter_mut() {
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12).cloned() {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
    }
    q
}

/// `Fix T_J = (A_J ∩ B) + (A_J^⊥ ∩ B^⊥)` for the Douglas-Rachford operator of
/// the coordinate subspace `A_J` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSetDescription {
    pub support: IndexSet,
    /// Columns span the direction space `A_J ∩ ker M` of `A_J ∩ B`.
    pub basis_intersection: DMatrix<f64>,
    /// Columns span `A_J^⊥ ∩ range(Mᵀ)`.
    pub basis_orthogonal: DMatrix<f64>,
    /// Least-norm point of `A_J ∩ B`.
    pub anchor: DVector<f64>,
}

impl FixedPointSetDescription {
    pub fn orthogonal_dim(&self) -> usize {
        self.basis_orthogonal.ncols()
    }

    pub fn intersection_dim(&self) -> usize {
        self.basis_intersection.ncols()
    }

    /// `anchor + U a + W b`.
    pub fn point(&self, along_intersection: &DVector<f64>, along_orthogonal: &DVector<f64>) -> DVector<f64> {
        &self.anchor + &self.basis_intersection * along_intersection + &self.basis_orthogonal * along_orthogonal
    }

    /// Euclidean distance from `x` to the fixed-point set.
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.anchor;
        let along_u = &self.basis_intersection * self.basis_intersection.tr_mul(&d);
        let along_w = &self.basis_orthogonal * self.basis_orthogonal.tr_mul(&d);
        (d - along_u - along_w).norm()
    }
}

pub fn dr_fixed_point_set(set: &AffineSet, support: &[usize]) -> Result<FixedPointSetDescription> {
    let n = set.dim();
    let mut support: IndexSet = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if let Some(&bad) = support.iter().find(|&&i| i >= n) {
        return Err(Error::Config(format!("support index {bad} out of range for n = {n}")));
    }
    let threshold = SV_TOL * set.singular_value_range().1;
    let block = columns(set.matrix(), &support);
    let m = set.rows();
    let k = support.len();

    // Least-norm solution of M_J z = p.
    let mut anchor = DVector::zeros(n);
    if k > 0 {
        let z = block
            .clone()
            .svd(true, true)
            .solve(set.rhs(), threshold)
            .map_err(|e| Error::Config(e.to_string()))?;
        for (slot, &j) in support.iter().enumerate() {
            anchor[j] = z[slot];
        }
    }
    let residual = set.residual(&anchor).norm();
    if residual > set.feasibility_threshold() {
        return Err(Error::EmptyIntersection(residual));
    }

    let null = right_null_space(&block, threshold);
    let mut basis_intersection = DMatrix::zeros(n, null.ncols());
    for c in 0..null.ncols() {
        for (slot, &j) in support.iter().enumerate() {
            basis_intersection[(j, c)] = null[(slot, c)];
        }
    }

    // Mᵀ y for y in the left null space of M_J is zero on J and lies in range(Mᵀ).
    let left = if k == 0 {
        DMatrix::identity(m, m)
    } else {
        right_null_space(&block.transpose(), threshold)
    };
    let mut lifted = set.matrix().tr_mul(&left);
    for &j in &support {
        lifted.row_mut(j).fill(0.0);
    }

    Ok(FixedPointSetDescription {
        support,
        basis_intersection: orthonormalize(basis_intersection),
        basis_orthogonal: orthonormalize(lifted),
        anchor,
    })
}

/// `(R_{A_J} R_B x + x) / 2` for a fixed support `J`.
pub fn restricted_dr_step(set: &AffineSet, support: &[usize], x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(set.dim(), x.len())?;
    let rb = affine_reflection(set, x);
    let ra = 2.0 * restrict(&rb, support) - &rb;
    Ok(0.5 * (ra + x))
}

fn check_orthonormal(basis: &DMatrix<f64>, name: &str) -> Result<()> {
    let gram = basis.tr_mul(basis);
    let defect = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
    if defect > ORTHONORMAL_TOL {
        return Err(Error::DegenerateBasis(format!(
            "{name} is not orthonormal (max |BᵀB - I| = {defect:e})"
        )));
    }
    Ok(())
}

/// Cosine of the Friedrichs angle between two subspaces given by orthonormal
/// bases: the largest principal cosine left after removing the directions the
/// subspaces share. Zero when nothing is left.
pub fn friedrichs_cosine(subspace_a: &DMatrix<f64>, subspace_b: &DMatrix<f64>) -> Result<f64> {
    if subspace_a.nrows() != subspace_b.nrows() {
        return Err(Error::DegenerateBasis(format!(
            "bases live in R^{} and R^{}",
            subspace_a.nrows(),
            subspace_b.nrows()
        )));
    }
    check_orthonormal(subspace_a, "first basis")?;
    check_orthonormal(subspace_b, "second basis")?;
    if subspace_a.ncols() == 0 || subspace_b.ncols() == 0 {
        return Ok(0.0);
    }
    let cosines = subspace_a.tr_mul(subspace_b).singular_values();
    Ok(cosines
        .iter()
        .cloned()
        .filter(|c| *c < 1.0 - INTERSECTION_TOL)
        .fold(0.0, f64::max))
}

/// Diagnostics of one problem at one order, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub order: usize,
    pub nu: f64,
    pub mu: f64,
    pub delta: f64,
    pub uprip_delta: f64,
    pub strong_regularity: bool,
    pub worst_support: IndexSet,
    pub supports_enumerated: u64,
}

pub fn diagnose(set: &AffineSet, order: usize, cap: u128) -> Result<DiagnosticReport> {
    let rip = rip_constants(set.matrix(), order, cap)?;
    let uprip = uprip_delta(set, order, cap)?;
    let strong = check_strong_regularity(set, order, cap)?;
    Ok(DiagnosticReport {
        order,
        nu: rip.nu,
        mu: rip.mu,
        delta: rip.delta,
        uprip_delta: uprip,
        strong_regularity: strong.holds,
        worst_support: strong.worst_support,
        supports_enumerated: rip.supports_enumerated,
    })
}
