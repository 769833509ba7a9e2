use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sepsr::SrError),

    #[error(transparent)]
    Astro(#[from] sepsr_astro::AstroError),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("validation threshold failed: {0}")]
    Threshold(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 4 for failed `--assert` thresholds,
    /// 3 for everything that fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(sepsr::SrError::Parse { .. } | sepsr::SrError::Version { .. }) => 2,
            HarnessError::Astro(sepsr_astro::AstroError::Parse { .. }) => 2,
            HarnessError::Threshold(_) => 4,
            _ => 3,
        }
    }
}
