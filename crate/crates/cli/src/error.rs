use std::path::Path;

use thiserror::Error;

/// Failure of a subcommand, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration. Exit status 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input data. Exit status 2.
    #[error("{0}")]
    Data(String),
    /// The numerics failed on otherwise valid input. Exit status 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<mpsa::Error> for CliError {
    fn from(err: mpsa::Error) -> Self {
        if err.is_numerical() {
            CliError::Numerical(err.to_string())
        } else {
            CliError::Data(err.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags errors with the file they came from.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T> WithPath<T> for mpsa::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| match CliError::from(e) {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
