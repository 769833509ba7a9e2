use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SrError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error(
        "rank-deficient least-squares system in {context} (condition estimate {condition:.3e}); \
         set ridge_lambda > 0 to regularize"
    )]
    RankDeficient { context: String, condition: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("non-finite value during {stage} (rank {rank}, sweep {sweep}, direction {direction:?})")]
    NonFinite {
        stage: &'static str,
        rank: usize,
        sweep: usize,
        direction: Option<usize>,
    },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SrError::Io {
            path: path.into(),
            source,
        }
    }
}
