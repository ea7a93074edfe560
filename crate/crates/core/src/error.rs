//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatches, malformed specs, bad layouts.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid argument combinations (overlapping sets, bad ranges, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A per-bin linear solve or inversion failed beyond the configured floor.
    #[error("conditioning error at bin {bin}: {message}")]
    Conditioning { bin: usize, message: String },

    /// AR spec with companion spectral radius at or above the stability limit.
    #[error("stability error: companion spectral radius {radius} >= {limit}")]
    Stability { radius: f64, limit: f64 },

    /// A graphical criterion (single-door, back-door, front-door) failed.
    #[error("inadmissible: condition {condition} violated: {message}")]
    Inadmissible { condition: String, message: String },

    /// Degenerate quantity (zero cofactor, all bins flagged, empty stratum).
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// Structure outside what the operation supports (e.g. cycles through
    /// an intervened node).
    #[error("unsupported structure: {0}")]
    Unsupported(String),

    /// No feasible value exists within the search cap.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
