use std::path::PathBuf;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("detector error on frame '{frame_id}': {msg}")]
    Detector { frame_id: String, msg: String },

    #[error("detector timed out after {seconds}s")]
    Timeout { seconds: f64 },

    #[error("no matching annotations: {0}")]
    EmptyDataset(String),

    #[error("no solution for target JS {target}: best achieved {best}")]
    NoSolution { target: f64, best: f64 },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("annotation universe mismatch: {0}")]
    UniverseMismatch(String),
}

impl Error {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Detector { .. } => "detector",
            Error::Timeout { .. } => "timeout",
            Error::EmptyDataset(_) => "empty-dataset",
            Error::NoSolution { .. } => "no-solution",
            Error::InvalidPlan(_) => "invalid-plan",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::UniverseMismatch(_) => "universe-mismatch",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
