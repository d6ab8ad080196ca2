use thiserror::Error;

pub type Result<T> = std::result::Result<T, SdrError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdrError {
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sample covariance is singular")]
    SingularCovariance,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("all eigenvalues fall below the floor")]
    AllEigenvaluesBelowFloor,
    #[error("basis is rank deficient")]
    RankDeficientBasis,
    #[error("expectile level {0} is outside (0, 1)")]
    TauOutOfRange(f64),
    #[error("degenerate sample: all rows identical")]
    DegenerateSample,
    #[error("weighted kernel system could not be solved")]
    SolveFailure,
    #[error("IRLS did not converge after {iterations} iterations (relative change {relative_change:e})")]
    NoConvergence {
        iterations: usize,
        relative_change: f64,
    },
    #[error("requested {slices} slices for {n} observations")]
    TooManySlices { slices: usize, n: usize },
    #[error("slice {0} is empty")]
    EmptySlice(usize),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("simulation models need p >= 6, got {0}")]
    InvalidP(usize),
}
