use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid tuple shape: {0}")]
    InvalidShape(String),

    #[error("expected {expected} coordinates, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("all homogeneous coordinates are zero")]
    AllZero,

    #[error("non-finite coordinate at index {0}")]
    NonFiniteCoordinate(usize),

    #[error("chart {0} is undefined at this point (coordinate is zero)")]
    ChartUndefined(usize),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("coordinates {p} and {q} lie in different tuples")]
    CrossTupleSwap { p: usize, q: usize },

    #[error("tuple {0} is identically zero")]
    ZeroTuple(usize),

    #[error("incidence violated on tuple {tuple} (defect {defect:e})")]
    IncidenceViolation { tuple: usize, defect: f64 },

    #[error("count must be at least 1")]
    InvalidCount,

    #[error("field evaluation failed: {0}")]
    EvaluationFailed(String),

    #[error("non-finite sample in finite-difference stencil")]
    NonFiniteSample,

    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("value {0} outside (0, 1]")]
    OutOfRange(f64),

    #[error("alpha = {0} outside the admissible range")]
    AlphaOutOfRange(f64),

    #[error("integrand domain error: {0}")]
    DomainError(String),

    #[error("tensor quadrature refused for m = {0}; use Monte Carlo")]
    QuadratureRefused(usize),

    #[error("invalid test function spec: {0}")]
    InvalidSpec(String),

    #[error("metric fails the admissibility margin even at epsilon = 0")]
    NeverAdmissible,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
