use std::path::PathBuf;

use crate::restorers::plugin::PluginError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("rectangle {rect:?} lies outside a {width}x{height} image")]
    OutOfBounds {
        rect: crate::image::Rect,
        width: usize,
        height: usize,
    },

    #[error("invalid plate digits {0:?}: expected exactly 6 characters 0-9")]
    InvalidDigits(String),

    #[error("degenerate point configuration: {0}")]
    Degenerate(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("sobol stream exhausted at index {0}")]
    StreamExhausted(u64),

    #[error("incomplete evaluation table: {0}")]
    IncompleteTable(String),

    #[error("cannot normalise F: enclosed area is zero but {0} interior failures exist")]
    ZeroArea(usize),

    #[error("mismatched recoverability maps: {0}")]
    MapMismatch(String),

    #[error("not enough finite points for a fit: {0} (need at least 3)")]
    TooFewPoints(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected major version {expected})")]
    FormatVersion { found: String, expected: u32 },

    #[error(transparent)]
    Plugin(#[from] PluginError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PNG error: {0}")]
    Png(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
