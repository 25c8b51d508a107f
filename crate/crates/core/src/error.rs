use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed numerical input: wrong shapes, non-finite entries, out of range.
    #[error("invalid input: {0}")]
    Input(String),

    /// A valid input combined with an incompatible configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// `k` is the sample index, or `n` when only the sum over samples overflowed.
    #[error("non-finite value during assembly at (i={i}, j={j}, k={k})")]
    Assembly { i: usize, j: usize, k: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    /// True for errors caused by the caller's configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Config(_) | Error::Json(_) | Error::Format(_)
        )
    }
}
