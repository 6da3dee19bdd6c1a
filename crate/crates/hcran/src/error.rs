use std::path::PathBuf;

/// Harness failures, split by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),

    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),

    #[error("numeric failure: {0}")]
    Numeric(#[from] hcran_core::Error),
}

impl HarnessError {
    /// 1 for bad input or unwritable output, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numeric(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
