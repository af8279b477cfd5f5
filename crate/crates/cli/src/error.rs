//! Errors surfaced by the command-line harness.

use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] qpurify::Error),
    #[error("{message}")]
    Config { message: String, parameter: Option<String> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verification failed: {}", failed.join(", "))]
    VerifyFailed { failed: Vec<String> },
}

impl CliError {
    pub fn config(message: impl Into<String>, parameter: Option<&str>) -> Self {
        CliError::Config {
            message: message.into(),
            parameter: parameter.map(str::to_owned),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Model(e) => e.code(),
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::VerifyFailed { .. } => "verify-failed",
        }
    }

    pub fn parameter(&self) -> Option<String> {
        match self {
            CliError::Model(e) => e.parameter().map(str::to_owned),
            CliError::Config { parameter, .. } => parameter.clone(),
            CliError::Io { .. } => None,
            CliError::VerifyFailed { failed } => failed.first().cloned(),
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "code": self.code(), "message": self.to_string(), "parameter": self.parameter() })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
