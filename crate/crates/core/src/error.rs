use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("sub-covariance is singular")]
    SingularSubcovariance,

    #[error("pole {0} is not strictly inside the unit disc")]
    UnstablePole(String),

    #[error("quadrature did not converge (last change {0:e})")]
    QuadratureNotConverged(f64),

    #[error("functions are linearly dependent (pivot norm {0:e})")]
    RankDeficient(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("normal matrix is singular (reciprocal condition {0:e})")]
    SingularNormalMatrix(f64),

    #[error("AR order {n_a} exceeds smallest model order {n_min}")]
    OrderTooSmall { n_a: usize, n_min: usize },

    #[error("leading input covariance block of size {0} is singular")]
    SingularInputCovariance(usize),

    #[error("upper factor is degenerate: first-row energy {0:e}")]
    DegenerateFactor(f64),

    #[error("eta^2 = {eta2} exceeds lambda_1 = {lambda1}")]
    EtaTooLarge { eta2: f64, lambda1: f64 },

    #[error("order pattern {0:?} is not n1 + 1 = n2 = ... = nm")]
    OrderPatternUnsupported(Vec<usize>),

    #[error("basis cannot be realized as a real filter: {0}")]
    NotRealizable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
