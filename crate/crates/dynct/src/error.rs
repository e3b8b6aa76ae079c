use std::path::PathBuf;

/// Failures surfaced by the CLI, each with a stable machine-readable class.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Syntax { path: PathBuf, line: usize, msg: String },

    #[error("line {line}: unknown key `{key}`{hint}")]
    UnknownKey { key: String, line: usize, hint: String },

    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },

    #[error("{0}")]
    MissingInput(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] dynct_core::Error),

    #[error("{0}")]
    Selftest(String),
}

impl Error {
    pub fn class(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "config-syntax",
            Error::UnknownKey { .. } => "config-unknown-key",
            Error::Invalid { .. } => "config-invalid",
            Error::MissingInput(_) => "missing-input",
            Error::Format { .. } => "bad-format",
            Error::Io { .. } => "io",
            Error::Core(_) => "compute",
            Error::Selftest(_) => "selftest-failed",
        }
    }

    pub(crate) fn invalid(key: &str, msg: impl Into<String>) -> Self {
        Error::Invalid { key: key.into(), msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
