use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("cannot parse {what} {text:?}: {reason}")]
    Parse {
        what: &'static str,
        text: String,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Domain(#[from] cqed_mermin::Error),

    /// The run completed but its result fails a check (e.g. the dispersive
    /// condition).
    #[error("{0}")]
    Rejected(String),
}

impl CliError {
    pub fn parse(what: &'static str, text: &str, reason: impl Into<String>) -> Self {
        CliError::Parse {
            what,
            text: text.to_owned(),
            reason: reason.into(),
        }
    }

    /// 2 for anything caused by the input, 3 for numerical or I/O failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::Rejected(_) => 2,
            CliError::Domain(e) if e.is_validation() => 2,
            CliError::Domain(_) | CliError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
