use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("row {row} of the attention sums to {sum} (deviation above {tolerance:e})")]
    NotRowStochastic { row: usize, sum: f64, tolerance: f64 },

    #[error("row {0} has no neighbors")]
    EmptyRow(usize),

    #[error("gave up building a random {degree}-regular graph on {n} nodes after {attempts} attempts (seed {seed})")]
    RetryBudgetExhausted {
        n: usize,
        degree: usize,
        attempts: usize,
        seed: u64,
    },

    #[error("{what}: {value:e} exceeds tolerance {tolerance:e}")]
    ToleranceBreach {
        what: String,
        value: f64,
        tolerance: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error is a numerical failure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::ToleranceBreach { .. } | Error::Numerical(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
