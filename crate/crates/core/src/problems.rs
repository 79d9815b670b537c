//! Built-in instances and seeded random problem families with planted sparse
//! solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projectors::sparse_margin;
use crate::rng::SplitMix64;
use crate::types::FeasibilityProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// 7x8 matrix of the first seven rows of a scaled 8x8 Hadamard matrix,
    /// solution `(10, 0, ..., 0)`, `s = 1`.
    Hadamard7x8,
    /// 2x3 instance on which both alternating projections and
    /// Douglas-Rachford can cycle; solution `(0, 10, 0)`, `s = 1`.
    Pathological,
    /// Standard normal entries scaled by `1/sqrt(m)`.
    Gaussian,
    /// Gaussian rows orthonormalized by modified Gram-Schmidt.
    RowOrthonormal,
    /// Random rows of the real orthonormal trigonometric basis.
    FourierLike,
}

impl GeneratorKind {
    pub fn is_builtin(self) -> bool {
        matches!(self, GeneratorKind::Hadamard7x8 | GeneratorKind::Pathological)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Hadamard7x8 => "hadamard7x8",
            GeneratorKind::Pathological => "pathological",
            GeneratorKind::Gaussian => "gaussian",
            GeneratorKind::RowOrthonormal => "row_orthonormal",
            GeneratorKind::FourierLike => "fourier_like",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown problem kind '{s}'"))
    }
}

fn default_scale() -> f64 {
    10.0
}

/// Recipe for a problem instance. `m`, `n`, `s` and `seed` are ignored by the
/// built-in kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub s: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub solution_scale: f64,
}

/// Non-fatal remarks about a generator spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorWarning {
    /// `s >= m`: the planted solution need not be the unique sparsest one.
    SparsestSolutionNotUnique,
}

impl GeneratorSpec {
    pub fn builtin(kind: GeneratorKind) -> Self {
        let (m, n, s) = match kind {
            GeneratorKind::Hadamard7x8 => (7, 8, 1),
            GeneratorKind::Pathological => (2, 3, 1),
            _ => (0, 0, 0),
        };
        Self {
            kind,
            m,
            n,
            s,
            seed: 0,
            solution_scale: default_scale(),
        }
    }

    pub fn random(kind: GeneratorKind, m: usize, n: usize, s: usize, seed: u64) -> Self {
        Self {
            kind,
            m,
            n,
            s,
            seed,
            solution_scale: default_scale(),
        }
    }

    pub fn validate(&self) -> Result<Vec<GeneratorWarning>> {
        if self.kind.is_builtin() {
            return Ok(Vec::new());
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::Config(format!(
                "random kinds need 0 < m < n, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if self.s > self.n {
            return Err(Error::Config(format!("s = {} exceeds n = {}", self.s, self.n)));
        }
        if !(self.solution_scale >= 1.0 && self.solution_scale.is_finite()) {
            return Err(Error::Config(format!(
                "solution_scale must be finite and at least 1, got {}",
                self.solution_scale
            )));
        }
        let mut warnings = Vec::new();
        if self.s >= self.m {
            warnings.push(GeneratorWarning::SparsestSolutionNotUnique);
        }
        Ok(warnings)
    }
}

/// The 7x8 matrix with `M Mᵀ = I`, entries `±1/sqrt(8)`.
pub fn hadamard7x8_matrix() -> DMatrix<f64> {
    const SIGNS: [[i8; 8]; 7] = [
        [1, 1, 1, 1, 1, 1, 1, 1],
        [1, 1, 1, 1, -1, -1, -1, -1],
        [1, 1, -1, -1, 1, 1, -1, -1],
        [1, -1, 1, -1, 1, -1, 1, -1],
        [1, 1, -1, -1, -1, -1, 1, 1],
        [1, -1, -1, 1, 1, -1, -1, 1],
        [1, -1, 1, -1, -1, 1, -1, 1],
    ];
    let scale = 1.0 / 8f64.sqrt();
    DMatrix::from_fn(7, 8, |i, j| f64::from(SIGNS[i][j]) * scale)
}

pub fn pathological_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.0, 0.0, 0.5, -1.0])
}

/// Starting point of the exact Douglas-Rachford 2-cycle on the pathological
/// instance, rounded from its rational coordinates.
pub fn pathological_cycle_start() -> DVector<f64> {
    let ratio = |num: &str, den: &str| num.parse::<f64>().unwrap() / den.parse::<f64>().unwrap();
    DVector::from_vec(vec![
        ratio("38894857328700073", "237684487542793012780631851008"),
        ratio("-297105609428507214758454580565", "118842243771396506390315925504"),
        ratio("-1188422437713940163629828887893", "237684487542793012780631851008"),
    ])
}

fn gaussian_matrix(rng: &mut SplitMix64, m: usize, n: usize, scale: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            out[(i, j)] = rng.normal() * scale;
        }
    }
    out
}

/// Modified Gram-Schmidt over the rows, applied twice.
fn orthonormalize_rows(mut a: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..2 {
        for i in 0..a.nrows() {
            for k in 0..i {
                let proj = a.row(i).dot(&a.row(k));
                let rk = a.row(k).clone_owned();
                let mut ri = a.row_mut(i);
                ri -= rk * proj;
            }
            let norm = a.row(i).norm();
            a.row_mut(i).unscale_mut(norm);
        }
    }
    a
}

fn fourier_like_matrix(rng: &mut SplitMix64, m: usize, n: usize) -> DMatrix<f64> {
    let pairs = m / 2;
    let available = (n - 1) / 2;
    let mut freqs: Vec<usize> = rng.sample_indices(available, pairs).into_iter().map(|k| k + 1).collect();
    freqs.sort_unstable();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    if m % 2 == 1 {
        rows.push(vec![1.0 / (n as f64).sqrt(); n]);
    }
    let amp = (2.0 / n as f64).sqrt();
    for k in freqs {
        let angle = |j: usize| std::f64::consts::TAU * ((k * j) % n) as f64 / n as f64;
        rows.push((0..n).map(|j| amp * angle(j).cos()).collect());
        rows.push((0..n).map(|j| amp * angle(j).sin()).collect());
    }
    DMatrix::from_fn(m, n, |i, j| rows[i][j])
}

fn planted_solution(rng: &mut SplitMix64, n: usize, s: usize, scale: f64) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for i in rng.sample_indices(n, s) {
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        x[i] = sign * (1.0 + (scale - 1.0) * rng.uniform());
    }
    x
}

/// Builds the instance described by `spec`.
///
/// Random kinds draw, in this order from one SplitMix64 stream seeded with
/// `spec.seed`: the matrix (row-major), the support of the planted solution,
/// then one sign and one magnitude per support index in draw order.
pub fn build(spec: &GeneratorSpec) -> Result<FeasibilityProblem> {
    spec.validate()?;
    match spec.kind {
        GeneratorKind::Hadamard7x8 => {
            let m = hadamard7x8_matrix();
            let mut x = DVector::zeros(8);
            x[0] = 10.0;
            let p = &m * &x;
            FeasibilityProblem::from_parts(m, p, 1, Some(x))
        }
        GeneratorKind::Pathological => FeasibilityProblem::from_parts(
            pathological_matrix(),
            DVector::from_vec(vec![-5.0, 5.0]),
            1,
            Some(DVector::from_vec(vec![0.0, 10.0, 0.0])),
        ),
        kind => {
            let (m, n) = (spec.m, spec.n);
            let mut rng = SplitMix64::new(spec.seed);
            let matrix = match kind {
                GeneratorKind::Gaussian => gaussian_matrix(&mut rng, m, n, 1.0 / (m as f64).sqrt()),
                GeneratorKind::RowOrthonormal => orthonormalize_rows(gaussian_matrix(&mut rng, m, n, 1.0)),
                GeneratorKind::FourierLike => fourier_like_matrix(&mut rng, m, n),
                _ => unreachable!(),
            };
            let x = planted_solution(&mut rng, n, spec.s, spec.solution_scale);
            let p = &matrix * &x;
            FeasibilityProblem::from_parts(matrix, p, spec.s, Some(x))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedStart {
    pub point: DVector<f64>,
    /// `||u||` for the perturbation `u = point - known_solution`.
    pub perturbation_norm: f64,
    /// Smallest nonzero magnitude of the known solution, if it is nonzero.
    pub margin: Option<f64>,
    /// `||u|| < margin / 2`: the start lies in the ball where local linear
    /// convergence is guaranteed.
    pub in_local_ball: bool,
}

/// `known_solution + u` with every `u_i` uniform in `(-radius, radius)`.
pub fn perturb_start(problem: &FeasibilityProblem, radius: f64, seed: u64) -> Result<PerturbedStart> {
    let solution = problem.known_solution.as_ref().ok_or(Error::NoKnownSolution)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("radius must be positive and finite, got {radius}")));
    }
    let mut rng = SplitMix64::new(seed);
    let u = DVector::from_fn(solution.len(), |_, _| rng.symmetric(radius));
    let perturbation_norm = u.norm();
    let margin = sparse_margin(solution).ok();
    Ok(PerturbedStart {
        point: solution + u,
        perturbation_norm,
        margin,
        in_local_ball: margin.is_some_and(|d| perturbation_norm < d / 2.0),
    })
}
