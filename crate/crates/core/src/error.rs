use std::path::PathBuf;

use thiserror::Error;

use crate::domain::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(ValidationReport),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("({query},{item}) is not a relevant pair")]
    NotRelevantPair { query: usize, item: usize },

    #[error("no evaluable queries")]
    NoEvaluableQueries,

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical overflow in Gram: {0}")]
    NumericalOverflow(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    /// Numerical failures are distinguished from input errors at the CLI boundary.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalOverflow(_))
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
