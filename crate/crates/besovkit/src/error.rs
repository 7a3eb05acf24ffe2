use thiserror::Error;

/// Library-wide error type.
///
/// The CLI maps variants to exit codes: argument-class errors exit 2,
/// precondition-class errors exit 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("decomposition failed at cube (j={j}, m={m:?}): {msg}")]
    Decomposition { j: i32, m: Vec<i64>, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Argument(_) | Error::Io(_) | Error::Format(_) => 2,
            Error::Precondition(_) | Error::Construction(_) | Error::Decomposition { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
