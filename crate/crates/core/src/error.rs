//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input data (labels, dims, non-finite values).
    #[error("data error: {0}")]
    Data(String),

    /// Tensor or layer shape mismatch.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// Invalid configuration field. The string names the offending field path.
    #[error("config error: {0}")]
    Config(String),

    /// Training aborted on a non-finite loss.
    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            expected: expected.into(),
            got: got.into(),
        }
    }

    /// Process exit code for the CLI: 1 config/data, 2 usage, 3 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
