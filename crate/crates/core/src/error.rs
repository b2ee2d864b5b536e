use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the operation's domain (bad index, non-positive
    /// hyperparameter, out-of-range state, empty grid, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A size limit was exceeded (variable count, joint state space).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A BDe hypothetical network puts zero mass on a scored cell.
    #[error("degenerate prior: hypothetical network gives zero mass to child {child}, parent configuration {parent_config}, state {state}")]
    DegeneratePrior {
        child: usize,
        parent_config: usize,
        state: usize,
    },

    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
