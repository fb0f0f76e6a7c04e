use std::fmt;
use std::path::Path;

/// Process exit status for the command-line driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Internal = 1,
    Input = 2,
}

/// Error carrying the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Input,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: ExitCode::Internal,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        let message = format!("{}: {err}", path.display());
        match err.kind() {
            std::io::ErrorKind::NotFound
            | std::io::ErrorKind::PermissionDenied
            | std::io::ErrorKind::AlreadyExists
            | std::io::ErrorKind::InvalidData => CliError::input(message),
            _ => CliError::internal(message),
        }
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<maint_core::Error> for CliError {
    fn from(err: maint_core::Error) -> Self {
        use maint_core::Error as E;
        let code = match err {
            E::Argument(_)
            | E::Usage(_)
            | E::Data(_)
            | E::EmptyDataset
            | E::Protocol(_)
            | E::Config(_)
            | E::Index { .. } => ExitCode::Input,
            E::Dimension { .. }
            | E::EmptyDistribution
            | E::EmptyAttention
            | E::EmptyPrefix
            | E::NonFiniteLoss { .. } => ExitCode::Internal,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::internal(format!("csv: {err}"))
    }
}
