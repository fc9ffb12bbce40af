use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("recursion level {level} out of range (max {max})")]
    RecursionOutOfRange { level: u32, max: u32 },

    #[error("harmonic index out of range: l={l}, k={k} (band limit {max})")]
    IndexOutOfRange { l: i64, k: i64, max: usize },

    #[error("band limit {requested} exceeds supported maximum {max}")]
    BandLimit { requested: usize, max: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown shape '{name}' (valid: {valid})")]
    UnknownShape { name: String, valid: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFinite {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures map to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::RecursionOutOfRange { .. }
                | Error::IndexOutOfRange { .. }
                | Error::BandLimit { .. }
                | Error::ShapeMismatch(_)
                | Error::InvalidArgument(_)
                | Error::UnknownShape { .. }
                | Error::Config(_)
        )
    }
}
