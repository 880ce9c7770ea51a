use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QaeError>;

#[derive(Debug, Error)]
pub enum QaeError {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    IndexOutOfRange { index: usize, n_qubits: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trash projection probability {probability:e} is below 1e-12")]
    DegenerateProjection { probability: f64 },

    #[error("{what} of size {size} exceeds the supported maximum of {max}")]
    Capacity {
        what: &'static str,
        size: usize,
        max: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl QaeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QaeError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QaeError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the experiment runner: 1 configuration,
    /// 2 numeric failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            QaeError::Numeric(_) | QaeError::DegenerateProjection { .. } => 2,
            QaeError::Io { .. } => 3,
            _ => 1,
        }
    }
}
