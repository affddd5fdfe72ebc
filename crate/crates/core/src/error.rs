use std::path::PathBuf;

/// Errors shared across the augmentation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate box: size must be strictly positive, got ({0}, {1}, {2})")]
    InvalidBox(f64, f64, f64),

    #[error("cloud is in the {found} frame, expected {expected}")]
    FrameMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("format error in {path} at byte offset {offset}: {reason}")]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("ego position ({0:.2}, {1:.2}) lies outside the map")]
    OutOfMap(f64, f64),

    #[error("box footprint lies entirely outside the cropped map")]
    OutOfCrop,

    #[error("box contains no points")]
    EmptyObject,

    #[error("grounding failed: no points near ({0:.2}, {1:.2}) and no reference height")]
    GroundingFailure(f64, f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("synthetic spec error: {0}")]
    SynthSpec(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
