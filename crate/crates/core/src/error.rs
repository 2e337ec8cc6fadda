use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular pivot {pivot} in symmetric factorization")]
    SingularPivot { pivot: usize },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
