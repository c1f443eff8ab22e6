//! CLI error type with the exit-code contract: 1 for configuration
//! problems, 2 for data problems, 3 for a fit that hit its iteration cap
//! (artifacts are still written).

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::NonConvergence(msg) => write!(f, "did not converge: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mcvar::Error> for CliError {
    fn from(e: mcvar::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
