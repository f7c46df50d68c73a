use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {0} outside the INT8 sign-magnitude range [-255, 255]")]
    Range(i64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("vector length {len} exceeds capacity {capacity}; fold the job temporally")]
    Capacity { len: usize, capacity: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no scalability entry for {key}; valid keys: {valid}")]
    Lookup { key: String, valid: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mapping plan does not match job/architecture: {0}")]
    PlanStale(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
