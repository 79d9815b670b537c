//! Problem data model: the affine constraint set, the sparsity constraint and
//! the feasibility problem pairing them, plus JSON loading and validation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted list of 0-based coordinate indices.
pub type IndexSet = Vec<usize>;

/// Numerical tolerances attached to a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `M` is rank deficient when `sigma_min <= rank_tol * sigma_max`.
    pub rank_tol: f64,
    /// Residuals `||Mx - p||` are accepted up to `feas_tol * (1 + ||p||)`.
    pub feas_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            feas_tol: 1e-9,
        }
    }
}

/// Number of entries that are exactly nonzero.
pub fn count_nonzeros(x: &DVector<f64>) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

/// The affine set `{x | Mx = p}` for a full-row-rank `M`.
///
/// The Cholesky factor of `M Mᵀ` is computed once; every projection reuses it.
#[derive(Debug, Clone)]
pub struct AffineSet {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    gram: Cholesky<f64, Dyn>,
    sigma_min: f64,
    sigma_max: f64,
    tol: Tolerances,
}

impl AffineSet {
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        Self::with_tolerances(matrix, rhs, Tolerances::default())
    }

    pub fn with_tolerances(matrix: DMatrix<f64>, rhs: DVector<f64>, tol: Tolerances) -> Result<Self> {
        let (sigma_min, sigma_max) = check_matrix(&matrix, &rhs, tol).map_err(Error::Invalid)?;
        let gram = Cholesky::new(&matrix * matrix.transpose()).ok_or_else(|| {
            Error::Invalid(vec![Violation::new(
                ViolationCode::RankDeficient,
                "M Mᵀ is not numerically positive definite",
            )])
        })?;
        Ok(Self {
            matrix,
            rhs,
            gram,
            sigma_min,
            sigma_max,
            tol,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    /// Number of constraints `m`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// Smallest and largest singular value of `M`, computed at construction.
    pub fn singular_value_range(&self) -> (f64, f64) {
        (self.sigma_min, self.sigma_max)
    }

    /// `Mx - p`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x - &self.rhs
    }

    /// Acceptance threshold for `||Mx - p||`.
    pub fn feasibility_threshold(&self) -> f64 {
        self.tol.feas_tol * (1.0 + self.rhs.norm())
    }

    /// Solves `(M Mᵀ) y = r` with the stored factorization.
    pub fn solve_gram(&self, r: &DVector<f64>) -> DVector<f64> {
        self.gram.solve(r)
    }

    /// Lower-triangular factor `L` with `M Mᵀ = L Lᵀ`.
    pub fn gram_factor(&self) -> DMatrix<f64> {
        self.gram.l()
    }

    /// `M†(Mx - p)`, the correction removed by the affine projector.
    pub(crate) fn correction(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.gram.solve(&self.residual(x));
        self.matrix.tr_mul(&y)
    }

    /// `max |(M Mᵀ - I)_ij|`.
    pub fn gram_identity_defect(&self) -> f64 {
        let g = &self.matrix * self.matrix.transpose();
        let m = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

fn extreme_singular_values(matrix: &DMatrix<f64>) -> (f64, f64) {
    // Work on the smaller of M and Mᵀ Householder-reduced to a square factor.
    let sv = if matrix.nrows() < matrix.ncols() {
        let r = matrix.transpose().qr().unpack_r();
        r.singular_values()
    } else {
        matrix.singular_values()
    };
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

/// Extreme singular values of a valid matrix, or everything wrong with it.
fn check_matrix(matrix: &DMatrix<f64>, rhs: &DVector<f64>, tol: Tolerances) -> Result<(f64, f64), Vec<Violation>> {
    let mut out = Vec::new();
    let (m, n) = matrix.shape();
    if m == 0 || n == 0 {
        out.push(Violation::new(ViolationCode::EmptyMatrix, "M must have at least one row and column"));
        return Err(out);
    }
    if rhs.len() != m {
        out.push(Violation::new(
            ViolationCode::DimensionMismatch,
            format!("p has length {} but M has {} rows", rhs.len(), m),
        ));
    }
    if matrix.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        out.push(Violation::new(ViolationCode::NonFinite, "M and p must contain finite numbers only"));
        return Err(out);
    }
    if m > n {
        out.push(Violation::new(
            ViolationCode::TooManyRows,
            format!("M is {m}x{n}; at most n rows are allowed"),
        ));
        return Err(out);
    }
    let (smin, smax) = extreme_singular_values(matrix);
    if !(smax > 0.0 && smin > tol.rank_tol * smax) {
        out.push(Violation::new(
            ViolationCode::RankDeficient,
            format!("smallest singular value {smin:e} <= {:e} x largest {smax:e}", tol.rank_tol),
        ));
    }
    if out.is_empty() {
        Ok((smin, smax))
    } else {
        Err(out)
    }
}

/// The set of vectors in `R^n` with at most `s` nonzero entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityConstraint {
    n: usize,
    s: usize,
}

impl SparsityConstraint {
    pub fn new(n: usize, s: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("ambient dimension must be positive".into()));
        }
        if s > n {
            return Err(Error::Config(format!("sparsity {s} exceeds dimension {n}")));
        }
        Ok(Self { n, s })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sparsity(&self) -> usize {
        self.s
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.n && count_nonzeros(x) <= self.s
    }
}

/// Find `x` with `||x||_0 <= s` and `Mx = p`.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub affine: AffineSet,
    pub sparsity: SparsityConstraint,
    pub known_solution: Option<DVector<f64>>,
}

impl FeasibilityProblem {
    pub fn new(
        affine: AffineSet,
        sparsity: SparsityConstraint,
        known_solution: Option<DVector<f64>>,
    ) -> Result<Self> {
        let problem = Self {
            affine,
            sparsity,
            known_solution,
        };
        let violations = problem.violations();
        if violations.is_empty() {
            Ok(problem)
        } else {
            Err(Error::Invalid(violations))
        }
    }

    /// Convenience constructor from a dense matrix, vector and sparsity level.
    pub fn from_parts(
        matrix: DMatrix<f64>,
        rhs: DVector<f64>,
        s: usize,
        known_solution: Option<DVector<f64>>,
    ) -> Result<Self> {
        assemble(matrix, rhs, s, known_solution, Tolerances::default()).map_err(Error::Invalid)
    }

    pub fn dim(&self) -> usize {
        self.sparsity.dim()
    }

    pub fn sparsity_level(&self) -> usize {
        self.sparsity.sparsity()
    }

    /// Invariants tying the two sets and the optional solution together.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.affine.dim() != self.sparsity.dim() {
            out.push(Violation::new(
                ViolationCode::DimensionMismatch,
                format!(
                    "affine set lives in R^{} but sparsity constraint in R^{}",
                    self.affine.dim(),
                    self.sparsity.dim()
                ),
            ));
            return out;
        }
        if let Some(sol) = &self.known_solution {
            known_solution_violations(&self.affine, self.sparsity.sparsity(), sol, &mut out);
        }
        out
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument::from_parts(
            self.affine.matrix(),
            self.affine.rhs(),
            self.sparsity.sparsity(),
            self.known_solution.as_ref(),
        )
    }
}

fn known_solution_violations(affine: &AffineSet, s: usize, sol: &DVector<f64>, out: &mut Vec<Violation>) {
    if sol.len() != affine.dim() {
        out.push(Violation::new(
            ViolationCode::KnownSolutionLength,
            format!("known_solution has length {} but n = {}", sol.len(), affine.dim()),
        ));
        return;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        out.push(Violation::new(ViolationCode::NonFinite, "known_solution must be finite"));
        return;
    }
    let res = affine.residual(sol).norm();
    if res > affine.feasibility_threshold() {
        out.push(Violation::new(
            ViolationCode::KnownSolutionInfeasible,
            format!("||M x - p|| = {res:e} exceeds {:e}", affine.feasibility_threshold()),
        ));
    }
    let nnz = count_nonzeros(sol);
    if nnz > s {
        out.push(Violation::new(
            ViolationCode::KnownSolutionNotSparse,
            format!("known_solution has {nnz} nonzeros, more than s = {s}"),
        ));
    }
}

/// Machine-readable reason a problem is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    EmptyMatrix,
    RaggedMatrix,
    DimensionMismatch,
    NonFinite,
    TooManyRows,
    RankDeficient,
    SparsityOutOfRange,
    KnownSolutionLength,
    KnownSolutionInfeasible,
    KnownSolutionNotSparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    pub fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", serde_json::to_string(&self.code).unwrap_or_default().trim_matches('"'), self.message)
    }
}

/// Serialized form of a problem: `{"M": [[..]], "p": [..], "s": k, "known_solution": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(rename = "M")]
    pub matrix: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_solution: Option<Vec<f64>>,
}

impl ProblemDocument {
    pub fn from_parts(
        matrix: &DMatrix<f64>,
        rhs: &DVector<f64>,
        s: usize,
        known_solution: Option<&DVector<f64>>,
    ) -> Self {
        Self {
            matrix: matrix.row_iter().map(|r| r.iter().cloned().collect()).collect(),
            p: rhs.iter().cloned().collect(),
            s,
            known_solution: known_solution.map(|x| x.iter().cloned().collect()),
        }
    }

    fn dense_matrix(&self) -> Option<DMatrix<f64>> {
        let m = self.matrix.len();
        let n = self.matrix.first().map_or(0, Vec::len);
        if self.matrix.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(DMatrix::from_fn(m, n, |i, j| self.matrix[i][j]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem documents always serialize")
    }
}

fn assemble(
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    s: usize,
    known_solution: Option<DVector<f64>>,
    tol: Tolerances,
) -> Result<FeasibilityProblem, Vec<Violation>> {
    let n = matrix.ncols();
    let mut out = Vec::new();
    let affine = match AffineSet::with_tolerances(matrix, rhs, tol) {
        Ok(set) => Some(set),
        Err(Error::Invalid(v)) => {
            out.extend(v);
            None
        }
        Err(e) => return Err(vec![Violation::new(ViolationCode::DimensionMismatch, e.to_string())]),
    };
    if n > 0 && s > n {
        out.push(Violation::new(
            ViolationCode::SparsityOutOfRange,
            format!("s = {s} exceeds n = {n}"),
        ));
    }
    match affine {
        Some(affine) if out.is_empty() => {
            let sparsity = SparsityConstraint::new(n, s).expect("checked above");
            FeasibilityProblem::new(affine, sparsity, known_solution).map_err(|e| match e {
                Error::Invalid(v) => v,
                e => vec![Violation::new(ViolationCode::DimensionMismatch, e.to_string())],
            })
        }
        _ => Err(out),
    }
}

type Parts = (DMatrix<f64>, DVector<f64>, Option<DVector<f64>>);

fn document_parts(doc: &ProblemDocument) -> Result<Parts, Vec<Violation>> {
    let matrix = doc
        .dense_matrix()
        .ok_or_else(|| vec![Violation::new(ViolationCode::RaggedMatrix, "rows of M differ in length")])?;
    let known = doc.known_solution.as_deref().map(DVector::from_column_slice);
    Ok((matrix, DVector::from_column_slice(&doc.p), known))
}

/// Every invariant violation of a problem document; empty means valid.
pub fn validate_problem(doc: &ProblemDocument, tol: &Tolerances) -> Vec<Violation> {
    match document_parts(doc).and_then(|(m, p, known)| assemble(m, p, doc.s, known, *tol)) {
        Ok(_) => Vec::new(),
        Err(v) => v,
    }
}

/// Parses, validates and factorizes a problem from its JSON document.
pub fn load_problem(text: &str) -> Result<FeasibilityProblem> {
    load_problem_with(text, Tolerances::default())
}

pub fn load_problem_with(text: &str, tol: Tolerances) -> Result<FeasibilityProblem> {
    let doc: ProblemDocument = serde_json::from_str(text)?;
    problem_from_document(&doc, tol)
}

pub fn problem_from_document(doc: &ProblemDocument, tol: Tolerances) -> Result<FeasibilityProblem> {
    document_parts(doc)
        .and_then(|(m, p, known)| assemble(m, p, doc.s, known, tol))
        .map_err(Error::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(v: &[Violation]) -> Vec<ViolationCode> {
        v.iter().map(|v| v.code).collect()
    }

    #[test]
    fn identity_with_zero_sparsity_is_valid() {
        let doc = ProblemDocument {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            p: vec![0.0, 0.0],
            s: 0,
            known_solution: Some(vec![0.0, 0.0]),
        };
        assert!(validate_problem(&doc, &Tolerances::default()).is_empty());
        let problem = problem_from_document(&doc, Tolerances::default()).unwrap();
        assert_eq!(problem.sparsity_level(), 0);
    }

    #[test]
    fn duplicated_row_is_rank_deficient() {
        let doc = ProblemDocument {
            matrix: vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]],
            p: vec![1.0, 1.0],
            s: 1,
            known_solution: None,
        };
        assert_eq!(codes(&validate_problem(&doc, &Tolerances::default())), vec![ViolationCode::RankDeficient]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let text = r#"{"M": [[1, 0, 0], [0, 1, 0]], "p": [1], "s": 1}"#;
        match load_problem(text) {
            Err(Error::Invalid(v)) => assert!(codes(&v).contains(&ViolationCode::DimensionMismatch)),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_and_malformed_documents_fail() {
        assert!(matches!(
            load_problem(r#"{"M": [[1, 0], [1]], "p": [1, 1], "s": 1}"#),
            Err(Error::Invalid(_))
        ));
        assert!(matches!(load_problem(r#"{"M": [[1, 0]], "p": [1], "s": -1}"#), Err(Error::Parse(_))));
        assert!(matches!(load_problem(r#"{"M": [[1, 0]], "p": [1e999], "s": 1}"#), Err(Error::Parse(_))));
        assert!(matches!(load_problem("not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn infeasible_or_dense_known_solution() {
        let doc = ProblemDocument {
            matrix: vec![vec![1.0, 1.0, 0.0]],
            p: vec![2.0],
            s: 1,
            known_solution: Some(vec![1.0, 1.0, 0.0]),
        };
        assert_eq!(
            codes(&validate_problem(&doc, &Tolerances::default())),
            vec![ViolationCode::KnownSolutionNotSparse]
        );
        let doc = ProblemDocument {
            known_solution: Some(vec![1.0, 0.0, 0.0]),
            ..doc
        };
        assert_eq!(
            codes(&validate_problem(&doc, &Tolerances::default())),
            vec![ViolationCode::KnownSolutionInfeasible]
        );
    }

    #[test]
    fn pathological_document_loads() {
        let text = r#"{"M": [[1, -0.5, 0], [0, 0.5, -1]], "p": [-5, 5], "s": 1, "known_solution": [0, 10, 0]}"#;
        let problem = load_problem(text).unwrap();
        assert_eq!(problem.affine.rows(), 2);
        assert_eq!(problem.dim(), 3);
        assert_eq!(problem.sparsity_level(), 1);
    }

    #[test]
    fn document_roundtrips_through_json() {
        let text = r#"{"M":[[1.0,-0.5,0.0],[0.0,0.5,-1.0]],"p":[-5.0,5.0],"s":1}"#;
        let problem = load_problem(text).unwrap();
        assert_eq!(problem.to_document().to_json(), text);
    }

    #[test]
    fn wide_checks() {
        let doc = ProblemDocument {
            matrix: vec![vec![1.0], vec![2.0]],
            p: vec![1.0, 2.0],
            s: 1,
            known_solution: None,
        };
        assert_eq!(codes(&validate_problem(&doc, &Tolerances::default())), vec![ViolationCode::TooManyRows]);
        let doc = ProblemDocument {
            matrix: vec![vec![1.0, 0.0]],
            p: vec![1.0],
            s: 3,
            known_solution: None,
        };
        assert_eq!(
            codes(&validate_problem(&doc, &Tolerances::default())),
            vec![ViolationCode::SparsityOutOfRange]
        );
    }
}
