use std::path::PathBuf;

use detglue_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// `--help` or `--version`; carries the rendered text.
    #[error("{0}")]
    Help(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("I/O error: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn key(key: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("key `{key}`: {msg}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 domain, 4 continuation, 5 fit, 6 branch, 7 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Unsupported(_) => 2,
                CoreError::Domain(_) | CoreError::Range(_) => 3,
                CoreError::Continuation(_) => 4,
                CoreError::Fit(_) => 5,
                CoreError::Branch(_) => 6,
            },
            CliError::Io { .. } => 7,
        }
    }

    /// Short class name used in error reports.
    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            0 => "help",
            2 => "config",
            3 => "domain",
            4 => "continuation",
            5 => "fit",
            6 => "branch",
            _ => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
