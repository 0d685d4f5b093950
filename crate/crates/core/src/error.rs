use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },

    #[error("backward called on a non-scalar tensor of shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("gradient graph already consumed by a previous backward pass")]
    GraphConsumed,

    #[error("loss does not depend on any differentiable tensor")]
    Detached,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for this error class: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Parse { .. } | Error::Data(_) | Error::Checkpoint(_) | Error::Io { .. } => 2,
            Error::Shape { .. }
            | Error::NonFinite { .. }
            | Error::NotScalar(_)
            | Error::GraphConsumed
            | Error::Detached
            | Error::Numeric(_) => 3,
        }
    }
}
