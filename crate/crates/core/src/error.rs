use thiserror::Error;

/// Errors raised by the geostatistics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("linear algebra failure: {0}")]
    LinAlg(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Overflow(_) | Error::Numeric(_) | Error::LinAlg(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
