use thiserror::Error;

/// Errors produced by the optimization toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("singular interpolation matrix: samples {first} and {second} are (nearly) coincident")]
    SingularSystem { first: usize, second: usize },

    #[error("correlation matrix is not positive definite even with nugget {nugget:e}")]
    NotPositiveDefinite { nugget: f64 },

    #[error("dual solver did not converge after {passes} passes (duality gap {gap:e})")]
    NoConvergence { passes: usize, gap: f64 },

    #[error("grid of {points} points exceeds the cap of {cap} (S = Q^K grows exponentially with K)")]
    GridTooLarge { points: f64, cap: usize },

    #[error("undefined error ratio: all test targets are zero")]
    ZeroDenominator,

    #[error("aperture is never switched on (mean directivity is zero)")]
    DeadAperture,

    #[error("switch-on instant {index} = {value} outside [0, 1)")]
    SwitchInstantOutOfRange { index: usize, value: f64 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for SbdError {
    fn from(err: std::io::Error) -> Self {
        SbdError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SbdError>;
