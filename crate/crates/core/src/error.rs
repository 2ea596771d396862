//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at index {index}: {context}")]
    NonFinite { index: usize, context: String },

    #[error("{path}: expected {expected} bytes for {nz}x{nx} grid, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
        nz: usize,
        nx: usize,
    },

    #[error("{path}: payload checksum {actual:#010x} does not match sidecar {expected:#010x}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: u32,
        actual: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid sidecar: {message}")]
    Sidecar { path: PathBuf, message: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numerical instability detected at internal step {step} (non-finite or diverging field); reduce dt or check the velocity model")]
    Instability { step: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("velocity out of sanity bounds [{min_allowed}, {max_allowed}] m/s: found {found} m/s{context}")]
    VelocityBounds {
        found: f64,
        min_allowed: f64,
        max_allowed: f64,
        context: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample {sample_id} failed at stage {stage}: {source}")]
    Stage {
        sample_id: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, CLI usage) rather
    /// than runtime/numerical failures. The CLI maps these to exit code 1.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
