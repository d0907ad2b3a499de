use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown unit `{0}`")]
    Unit(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
    #[error("combinational cycle through `{0}`")]
    Cycle(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("state error: {0}")]
    State(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
