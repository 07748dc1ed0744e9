//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor kernels, model evaluation, and fitting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A mode index outside `0..order` was requested.
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    /// Array lengths or tensor/matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A requested Tucker rank exceeds the dimension of its mode.
    #[error("rank {rank} exceeds dimension {dim} at mode {mode}")]
    RankOutOfRange { mode: usize, rank: usize, dim: usize },

    /// Any other violated precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
