use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("{path}:{line}: {msg}")]
    Ingest {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("unknown {what}: {id}")]
    Lookup { what: &'static str, id: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("window [{start}, {end}) out of bounds for signal of length {len}")]
    Boundary { start: i64, end: i64, len: usize },

    #[error("input too short: need at least {need} samples, got {got}")]
    InputTooShort { need: usize, got: usize },

    #[error("no usable beat in segment {0}")]
    NoContext(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Param(_) | Error::Config(_) | Error::Lookup { .. } => 2,
            Error::Ingest { .. }
            | Error::Io { .. }
            | Error::Format { .. }
            | Error::Shape { .. }
            | Error::Boundary { .. }
            | Error::InputTooShort { .. }
            | Error::NoContext(_) => 3,
            Error::Numerical(_) | Error::Diverged { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
