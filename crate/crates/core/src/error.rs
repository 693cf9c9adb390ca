use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension error: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("{op}: invalid parameter: {detail}")]
    Parameter { op: &'static str, detail: String },

    #[error("{op}: non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },

    #[error("format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },

    #[error("incompatible model: expected fingerprint {expected}, found {found}")]
    Incompatible { expected: String, found: String },

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn param(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
