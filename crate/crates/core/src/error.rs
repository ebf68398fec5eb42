use std::path::PathBuf;

/// Errors surfaced by corpus ingestion, checkpointing, training and
/// evaluation. The CLI maps these onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },

    #[error("{0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss in {term} term (epoch {epoch}, user {user})")]
    NonFinite {
        term: &'static str,
        epoch: usize,
        user: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::MalformedLine { .. } | Error::Data(_) | Error::Checkpoint(_)
        )
    }

    /// True for numerical failures (NaN/Inf encountered during training).
    pub fn is_numerical_error(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
