use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Iterative solver did not converge; indicates an implementation fault.
    #[error("{solver} did not converge after {iterations} iterations")]
    NoConvergence { solver: &'static str, iterations: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("zero total power in path set")]
    ZeroPower,

    #[error("path set has no line-of-sight path")]
    MissingLos,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter database: {0}")]
    Parameters(String),

    #[error("malformed {file}: {msg}")]
    Format { file: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(file: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format { file: file.into(), msg: msg.into() }
    }
}
