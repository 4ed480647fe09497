use std::path::PathBuf;

use thiserror::Error;

/// Failures of a harness command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("singular trace at index {index}: |tr| = {trace:e}")]
    Singularity { index: usize, trace: f64 },

    #[error("{0}")]
    Runtime(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 1,
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Singularity { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<softorder::Error> for HarnessError {
    fn from(e: softorder::Error) -> Self {
        match e {
            softorder::Error::Format { .. } => HarnessError::Data(e.to_string()),
            softorder::Error::Singularity { index, trace } => HarnessError::Singularity { index, trace },
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

pub type HarnessResult<T> = Result<T, HarnessError>;
