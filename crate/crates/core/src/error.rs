use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An iterate of the chaotic map left its domain `y > b`.
    #[error("chaotic map left its domain at iterate {index} (y = {value})")]
    Domain { index: usize, value: f64 },

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("region {region} does not fit a {width}x{height} image")]
    RegionMismatch {
        region: String,
        width: usize,
        height: usize,
    },

    #[error("no line found (best Hough score {score})")]
    NoLineFound { score: u32 },

    #[error("matrix is singular")]
    Singular,

    #[error("pair (A, B) is not controllable")]
    Uncontrollable,

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure is numerical (as opposed to bad input data).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Singular | Error::Uncontrollable | Error::Undefined(_)
        )
    }
}
