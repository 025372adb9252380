use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error("empty input")]
    EmptyInput,

    #[error("variable `{0}` has fewer than two distinct states")]
    DegenerateVariable(String),

    #[error("too few rows: {got} (need at least {min})")]
    TooFewRows { got: usize, min: usize },

    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("self-loop on node `{0}`")]
    SelfLoop(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable mismatch: {0}")]
    VariableMismatch(String),

    #[error("assignment error: {0}")]
    Assignment(String),

    #[error("exhaustive search supports at most 5 variables, got {0}")]
    TooManyVariables(usize),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorKind::Config,
            Error::Numeric(_) | Error::EmptyCluster(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
