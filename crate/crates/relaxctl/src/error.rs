use thiserror::Error;

/// Errors shared across the crate.
///
/// Mathematical findings (an infeasible decomposition, a failed necessary
/// condition) are *not* errors; they are carried in the result types of the
/// operation that produced them. Errors cover malformed inputs, violated
/// preconditions, and numerical breakdown.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("integration diverged: non-finite state at step {step}")]
    Divergence { step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
