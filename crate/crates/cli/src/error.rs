use std::path::Path;

use panelcast::edr::EdrError;
use panelcast::eval::EvalError;
use panelcast::gbtree::GbtError;
use panelcast::panel::PanelError;
use panelcast::tuning::TuningError;
use thiserror::Error;

/// Failure of a command, classified by its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with a country code.
    pub(crate) fn within(self, country: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{country}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{country}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{country}: {m}")),
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EdrError> for CliError {
    fn from(e: EdrError) -> Self {
        match e {
            EdrError::InvalidEpsilon(_) | EdrError::ZeroK => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GbtError> for CliError {
    fn from(e: GbtError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<TuningError> for CliError {
    fn from(e: TuningError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
