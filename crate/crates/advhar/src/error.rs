use std::path::PathBuf;

/// Errors produced across the pipeline, grouped so the CLI can map them
/// to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("infeasible pair cell: subject {0} has no activity group with at least 2 windows")]
    InfeasibleCell(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::Schema(_) | Error::Data(_) | Error::Shape { .. }
            | Error::InfeasibleCell(_) => 3,
            Error::Training(_) => 4,
            Error::Io { .. } | Error::Checkpoint(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
