use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    /// The coupling fails a regularity requirement (e.g. an unbounded
    /// lateral gradient) needed by the estimate being evaluated.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular pencil: {0}")]
    SingularPencil(String),

    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence { context: String, iterations: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
