//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "design matrix is rank deficient: |R[{index},{index}]| = {diag:.3e} is below {tol:.3e}"
    )]
    RankDeficient { index: usize, diag: f64, tol: f64 },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: need n >= p >= 1, got n = {n}, p = {p}")]
    InvalidShape { n: usize, p: usize },

    #[error("all raw {scheme} scores are zero and no probability floor is set")]
    DegenerateScheme { scheme: &'static str },

    #[error("SLEV shrinkage parameter must lie in (0, 1), got {0}")]
    InvalidLambda(f64),

    #[error("probability floor must lie in [0, 1) as a fraction of 1/n, got {0}")]
    InvalidFloor(f64),

    #[error("subsample size must be at least 1")]
    InvalidSize,

    #[error("weighted subsample design is rank deficient; redraw or increase the subsample size")]
    SingularSubsample,

    #[error("sampling probability for row {index} is zero")]
    ZeroProbability { index: usize },

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("invalid data spec: {0}")]
    InvalidSpec(String),

    #[error("coefficient template needs p >= 4, got p = {0}")]
    TooSmall(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("non-numeric value {value:?} at line {line}, column {column}")]
    NonNumeric {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("input file has no data rows")]
    EmptyFile,

    #[error("every replicate failed for scheme {scheme} at r = {r}")]
    ReplicatesExhausted { scheme: &'static str, r: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient { .. }
            | Error::SingularSubsample
            | Error::DegenerateScheme { .. }
            | Error::ZeroProbability { .. }
            | Error::ReplicatesExhausted { .. } => 3,
            _ => 2,
        }
    }
}
