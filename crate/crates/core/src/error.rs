use thiserror::Error;

use crate::sinkhorn::Potentials;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cost matrix is not symmetric at ({i}, {j})")]
    NonSymmetricCost { i: usize, j: usize },
    #[error("cost matrix has a negative entry at ({i}, {j})")]
    NegativeCost { i: usize, j: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("ground space has no points")]
    EmptySpace,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("tangent vector is not balanced (total mass {0:e})")]
    UnbalancedTangent(f64),
    #[error("tangent charges point {0} outside the support of the measure")]
    SupportViolation(usize),
    #[error("velocity is not tangent to the unit sphere (inner product {0:e})")]
    NotTangent(f64),
    #[error("not in the image of the embedding: {0}")]
    NotInImage(String),
    #[error("second eigenvalue {0} is numerically 1; support is disconnected")]
    SingularBeyondGauge(f64),
    #[error("Sinkhorn did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded {
        iterations: usize,
        residual: f64,
        best: Box<Potentials>,
    },
    #[error("potentials are not converged")]
    NotConverged,
    #[error("mass {0} is degenerate; expected 0 < m < 1")]
    DegenerateMass(f64),
    #[error("adaptive quadrature stalled with error estimate {0:e}")]
    QuadratureFailure(f64),
    #[error("operation needs point coordinates and squared Euclidean cost")]
    NotSqEuclidean,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
