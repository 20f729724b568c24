use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} is {actual}, limit {limit}")]
    Capacity { what: &'static str, actual: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("{method} did not converge after {iterations} iterations ({detail})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("feature grid for {pauli} has {cells} cells, cap is {cap}; lower delta1 or raise delta2")]
    Blowup { pauli: String, cells: u128, cap: u64 },

    #[error("invalid density: {0}")]
    Density(String),

    #[error("training diverged at epoch {epoch}: objective {objective}")]
    Diverged { epoch: usize, objective: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
