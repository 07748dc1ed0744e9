//! CLI error type carrying the process exit code.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
//! failure. Diagnostics go to stderr; stdout carries only data/paths.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag/data combinations.
    Usage(String),
    /// Unreadable, unwritable, or malformed files and inconsistent content.
    Data(String),
    /// Non-finite results where finite numbers are required.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn usage(e: impl fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn data(e: impl fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
