use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A parameter lies outside the hypotheses of the inequality being
    /// evaluated (e.g. a subsystem distance too large for the continuity
    /// regime). Distinct from `InvalidArgument` so callers can report
    /// "not covered by the theory" instead of "bad input".
    #[error("outside theorem domain: {0}")]
    OutOfTheoremDomain(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
