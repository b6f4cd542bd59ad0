use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its contract. `field` is the dotted path
    /// of the offending key (e.g. `grid.n`).
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// Inputs are individually valid but inconsistent with each other.
    #[error("data contract violated: {0}")]
    DataContract(String),

    /// A numerical safeguard tripped.
    #[error("numerical guard: {0}")]
    NumericalGuard(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2: configuration error, 3: data-contract error (including malformed
    /// input files), 4: numerical guard, 1: anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::DataContract(_) | Error::LengthMismatch { .. } | Error::Format { .. } => 3,
            Error::NumericalGuard(_) | Error::LinAlg(_) => 4,
            _ => 1,
        }
    }
}
