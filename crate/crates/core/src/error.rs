use std::path::PathBuf;

use crate::time::SimTime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error("invalid trace: {0}")]
    TraceValidation(String),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("scenario {origin}: {message}")]
    Scenario { origin: String, message: String },

    #[error("sojourn time undefined: packet enqueued at {enqueued_at} but now is {now}")]
    NegativeSojourn { enqueued_at: SimTime, now: SimTime },

    #[error("unknown class {class} (configured classes: {configured})")]
    UnknownClass { class: usize, configured: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("simulation invariant violated at {at}: {message}")]
    Invariant { at: SimTime, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
