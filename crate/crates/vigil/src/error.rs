//! Command-level errors mapped onto process exit codes.

/// Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric/training.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError::Numeric(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<vigil_core::Error> for CliError {
    fn from(err: vigil_core::Error) -> Self {
        CliError::Numeric(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Context helper for file errors.
pub fn at_path(path: &std::path::Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |err| CliError::io(path, err)
}
