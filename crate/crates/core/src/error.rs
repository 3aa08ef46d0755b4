use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("enumeration budget exceeded: {subsets} subsets > limit {limit}")]
    Budget { subsets: u128, limit: u128 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 3 for numeric degeneracy, 1 for I/O,
    /// 2 for everything the caller can fix by changing its input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericDegeneracy(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
