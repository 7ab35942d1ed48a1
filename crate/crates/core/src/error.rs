use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("user index {index} out of range ({count} users)")]
    UserIndex { index: usize, count: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("effective degrees of freedom undefined for a zero matrix")]
    ZeroMatrix,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 3 for file errors, 2 for bad input, 1 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Csv { .. } => 3,
            Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension(_) | Error::UserIndex { .. } => 2,
            Error::NotPositiveSemidefinite { .. } | Error::Singular(_) | Error::ZeroMatrix => 1,
        }
    }
}
