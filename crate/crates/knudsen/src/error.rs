//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid velocity grid: {0}")]
    Grid(String),

    #[error("field length {found} does not match node count {expected}")]
    FieldLength { expected: usize, found: usize },

    #[error("invalid boundary curve: {0}")]
    Curve(String),

    #[error("point outside the boundary collar: {0}")]
    OutsideCollar(String),

    #[error("null-space projection failed: {0}")]
    Projection(String),

    #[error("pseudo-inverse solvability violated: residual null component {0:.3e}")]
    Solvability(f64),

    #[error("characteristic point not reachable: {0}")]
    Unreachable(String),

    #[error("fixed-point iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("corrector system singular: {0}")]
    SingularCorrector(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("monte carlo estimator: {0}")]
    MonteCarlo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
