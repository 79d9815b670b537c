use thiserror::Error;

use crate::types::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed problem document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid problem: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("enumerating C({n}, {order}) = {count} supports exceeds the cap of {cap}")]
    EnumerationTooLarge {
        n: usize,
        order: usize,
        count: u128,
        cap: u128,
    },

    #[error("sparse margin is undefined for the zero vector")]
    ZeroVector,

    #[error("point has {nonzeros} nonzeros, more than the sparsity level {s}")]
    NotSparse { nonzeros: usize, s: usize },

    #[error("rate is undefined: {0}")]
    RateUndefined(String),

    #[error("trace has {available} usable iterations, at least {required} are needed")]
    TooFewIterations { available: usize, required: usize },

    #[error("tracked quantity is exactly zero at iteration {0}")]
    QuantityVanished(usize),

    #[error("the restricted system M_J z = p has no solution (residual {0:e})")]
    EmptyIntersection(f64),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("problem has no known solution")]
    NoKnownSolution,
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
