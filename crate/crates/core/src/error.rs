//! Error type shared by every module in the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file holds {actual} bytes, not a multiple of the {frame_bytes}-byte frame size for {width}x{height} {pixel_format}")]
    TruncatedFile {
        path: PathBuf,
        actual: u64,
        frame_bytes: u64,
        width: usize,
        height: usize,
        pixel_format: String,
    },

    #[error("unsupported or inconsistent metadata: {0}")]
    BadMetadata(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("input too small: {0}")]
    TooSmall(String),

    #[error("too few frames: need at least {need}, got {got}")]
    TooFewFrames { need: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error("feature layout mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: String, found: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing reference: {0}")]
    MissingReference(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Attach a path to a raw io error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
