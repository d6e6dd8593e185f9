use std::path::PathBuf;

use crate::volume::MaskRole;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("I/O error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NIfTI file: {0}")]
    Format(String),

    #[error("unsupported NIfTI data type code {0}")]
    UnsupportedType(i16),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("missing {role} mask for case {case_id}")]
    MissingMask { case_id: String, role: MaskRole },

    #[error("inconsistent volumes: {0}")]
    Inconsistent(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid phantom spec: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoAt {
            path: path.into(),
            source,
        }
    }
}
