//! Sparse affine feasibility: find `x` with `Mx = p` and at most `s` nonzero
//! entries, by alternating projections, Douglas-Rachford or projected
//! gradients, plus the restricted isometry diagnostics that predict how fast
//! they converge.

pub mod diagnostics;
pub mod error;
pub mod problems;
pub mod projectors;
pub mod rng;
pub mod solvers;
pub mod types;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
pub use projectors::{
    gap_distance, in_normal_cone, project_affine, project_sparse, reflect_affine, reflect_sparse, NormalConeQuery,
    SparseProjection,
};
pub use solvers::{run, Algorithm, IterationTrace, SolverConfig, Termination};
pub use types::{
    load_problem, validate_problem, AffineSet, FeasibilityProblem, IndexSet, ProblemDocument, SparsityConstraint,
    Tolerances, Violation, ViolationCode,
};
