//! Projectors and reflectors onto the affine set `B` and the sparsity set `A_s`.
//!
//! `P_B` is single-valued. `P_{A_s}` is set-valued whenever several supports
//! tie for the `s` largest magnitudes; the canonical selection keeps the
//! lexicographically smallest optimal support and the full set of optimal
//! supports is reported alongside it.

use itertools::Itertools;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::types::{count_nonzeros, AffineSet, FeasibilityProblem, IndexSet, SparsityConstraint};

/// Absolute tolerance under which two magnitudes count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// At most this many optimal supports are listed in a [`SparseProjection`].
pub const MAX_LISTED_SUPPORTS: usize = 1024;

/// `P_B x = x - M†(Mx - p)`.
pub fn project_affine(x: &DVector<f64>, set: &AffineSet) -> Result<DVector<f64>> {
    check_len(set.dim(), x.len())?;
    Ok(affine_projection(set, x))
}

pub(crate) fn affine_projection(set: &AffineSet, x: &DVector<f64>) -> DVector<f64> {
    x - set.correction(x)
}

/// `R_B x = 2 P_B x - x`.
pub fn reflect_affine(x: &DVector<f64>, set: &AffineSet) -> Result<DVector<f64>> {
    check_len(set.dim(), x.len())?;
    Ok(affine_reflection(set, x))
}

pub(crate) fn affine_reflection(set: &AffineSet, x: &DVector<f64>) -> DVector<f64> {
    x - 2.0 * set.correction(x)
}

/// Result of projecting onto `A_s` (or reflecting through it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseProjection {
    /// Canonical image, computed from `optimal_supports[0]`.
    pub point: DVector<f64>,
    /// Optimal supports in lexicographic order, truncated to [`MAX_LISTED_SUPPORTS`].
    pub optimal_supports: Vec<IndexSet>,
    /// Total number of optimal supports, including any not listed.
    pub support_count: u128,
    pub ambiguous: bool,
}

/// Split of the coordinates induced by the `s` largest magnitudes.
struct Selection {
    /// Indices strictly above the tie band; part of every optimal support.
    forced: Vec<usize>,
    /// Indices inside the tie band around the `s`-th largest magnitude, ascending.
    tied: Vec<usize>,
    /// How many of `tied` each optimal support takes.
    need: usize,
}

impl Selection {
    fn new(x: &DVector<f64>, s: usize) -> Self {
        let n = x.len();
        if s == 0 {
            return Self {
                forced: Vec::new(),
                tied: Vec::new(),
                need: 0,
            };
        }
        if s >= n {
            return Self {
                forced: (0..n).collect(),
                tied: Vec::new(),
                need: 0,
            };
        }
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let (_, kth, _) = mags.select_nth_unstable_by(s - 1, |a, b| b.total_cmp(a));
        let threshold = *kth;
        let mut forced = Vec::with_capacity(s);
        let mut tied = Vec::new();
        for (i, v) in x.iter().enumerate() {
            let a = v.abs();
            if a > threshold + TIE_TOL {
                forced.push(i);
            } else if a >= threshold - TIE_TOL {
                tied.push(i);
            }
        }
        let need = s - forced.len();
        Self { forced, tied, need }
    }

    fn canonical_support(&self) -> IndexSet {
        let mut j: IndexSet = self.forced.iter().chain(&self.tied[..self.need]).cloned().collect();
        j.sort_unstable();
        j
    }

    fn count(&self) -> u128 {
        binomial(self.tied.len(), self.need)
    }

    fn supports(&self) -> impl Iterator<Item = IndexSet> + '_ {
        self.tied.iter().cloned().combinations(self.need).map(|chosen| {
            let mut j: IndexSet = self.forced.iter().cloned().chain(chosen).collect();
            j.sort_unstable();
            j
        })
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Restriction of `x` to the coordinates in `support`.
pub fn restrict(x: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for &i in support {
        out[i] = x[i];
    }
    out
}

/// Canonical point of `P_{A_s} x` and whether the projection is multivalued.
pub(crate) fn canonical_sparse(x: &DVector<f64>, s: usize) -> (DVector<f64>, bool) {
    let sel = Selection::new(x, s);
    (restrict(x, &sel.canonical_support()), sel.count() > 1)
}

/// Every image of `x` under the set-valued `P_{A_s}`, deduplicated, up to `cap` points.
pub(crate) fn all_sparse_images(x: &DVector<f64>, s: usize, cap: usize) -> Vec<DVector<f64>> {
    let sel = Selection::new(x, s);
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in sel.supports().take(cap) {
        let y = restrict(x, &j);
        if !out.contains(&y) {
            out.push(y);
        }
    }
    out
}

/// `P_{A_s} x`: keeps the `s` largest magnitudes.
pub fn project_sparse(x: &DVector<f64>, c: &SparsityConstraint) -> Result<SparseProjection> {
    check_len(c.dim(), x.len())?;
    let sel = Selection::new(x, c.sparsity());
    let optimal_supports: Vec<IndexSet> = sel.supports().take(MAX_LISTED_SUPPORTS).collect();
    let support_count = sel.count();
    Ok(SparseProjection {
        point: restrict(x, &optimal_supports[0]),
        optimal_supports,
        support_count,
        ambiguous: support_count > 1,
    })
}

/// `R_{A_s} x = 2 P_{A_s} x - x` through the canonical projection.
pub fn reflect_sparse(x: &DVector<f64>, c: &SparsityConstraint) -> Result<SparseProjection> {
    let mut proj = project_sparse(x, c)?;
    proj.point = 2.0 * &proj.point - x;
    Ok(proj)
}

/// `C_s(x)`: every size-`s` index set holding the `s` largest magnitudes, in
/// lexicographic order. The list grows combinatorially with the number of ties.
pub fn support_sets(x: &DVector<f64>, s: usize) -> Vec<IndexSet> {
    let s = s.min(x.len());
    Selection::new(x, s).supports().collect()
}

/// Smallest nonzero magnitude of `a`: the distance from `a` to the nearest
/// sparsity subspace that does not contain it.
pub fn sparse_margin(a: &DVector<f64>) -> Result<f64> {
    a.iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .min_by(f64::total_cmp)
        .ok_or(Error::ZeroVector)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalConeQuery {
    pub base_point: DVector<f64>,
    pub direction: DVector<f64>,
}

/// Membership in `N_{A_s}(a) = {v | ||v||_0 <= n - s} ∩ supp(a)^⊥`.
pub fn in_normal_cone(q: &NormalConeQuery, c: &SparsityConstraint) -> Result<bool> {
    check_len(c.dim(), q.base_point.len())?;
    check_len(c.dim(), q.direction.len())?;
    let nonzeros = count_nonzeros(&q.base_point);
    if nonzeros > c.sparsity() {
        return Err(Error::NotSparse {
            nonzeros,
            s: c.sparsity(),
        });
    }
    let orthogonal = q
        .base_point
        .iter()
        .zip(q.direction.iter())
        .all(|(a, v)| *a == 0.0 || *v == 0.0);
    Ok(orthogonal && count_nonzeros(&q.direction) <= c.dim() - c.sparsity())
}

/// `||P_{A_s} x - P_B x||` with the canonical sparse projection.
pub fn gap_distance(x: &DVector<f64>, problem: &FeasibilityProblem) -> Result<f64> {
    check_len(problem.dim(), x.len())?;
    Ok(gap(problem, x))
}

pub(crate) fn gap(problem: &FeasibilityProblem, x: &DVector<f64>) -> f64 {
    let (sparse, _) = canonical_sparse(x, problem.sparsity_level());
    (sparse - affine_projection(&problem.affine, x)).norm()
}
