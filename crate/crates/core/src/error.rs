//! Error type shared by every module of the crate.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("state error: {0}")]
    State(String),

    #[error("invalid probability {0}: must lie in [0, 1)")]
    InvalidProbability(f64),

    #[error("invalid logarithm base {0}: must be > 1")]
    InvalidBase(f64),

    #[error("invalid kernel fraction {0}: must lie in (0, 1]")]
    InvalidFraction(f64),

    #[error("degenerate batch: training-mode batch norm needs at least 2 values, got {0}")]
    DegenerateBatch(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown {kind} `{symbol}`")]
    Vocabulary { kind: &'static str, symbol: String },

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
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
