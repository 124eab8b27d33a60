//! CLI error type: every failure carries a machine-parsable class that
//! becomes the `error[<class>]: message` line and a nonzero exit code.

use std::fmt;

use distlab_core::{DatasetError, Error as CoreError};

/// Stable error classes, printed inside `error[...]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Bad flags or plan values.
    Config,
    /// File-system failures.
    Io,
    /// Dataset or artifact contents failed to parse or validate.
    Data,
    /// The named baseline directory does not exist or is incomplete.
    MissingBaseline,
    /// The baseline exists but was built from different data or settings.
    BaselineMismatch,
    /// Anything that indicates a bug rather than bad input.
    Internal,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Config => "config",
            Class::Io => "io",
            Class::Data => "data",
            Class::MissingBaseline => "missing-baseline",
            Class::BaselineMismatch => "baseline-mismatch",
            Class::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: Class,
    pub message: String,
}

impl CliError {
    pub fn new(class: Class, message: impl Into<String>) -> CliError {
        CliError {
            class,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> CliError {
        CliError::new(Class::Config, message)
    }

    pub fn io(message: impl Into<String>) -> CliError {
        CliError::new(Class::Io, message)
    }

    pub fn data(message: impl Into<String>) -> CliError {
        CliError::new(Class::Data, message)
    }

    pub fn missing_baseline(message: impl Into<String>) -> CliError {
        CliError::new(Class::MissingBaseline, message)
    }

    pub fn baseline_mismatch(message: impl Into<String>) -> CliError {
        CliError::new(Class::BaselineMismatch, message)
    }

    pub fn internal(message: impl Into<String>) -> CliError {
        CliError::new(Class::Internal, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        let class = match &e {
            CoreError::Io(_) => Class::Io,
            CoreError::Dataset(DatasetError::Io { .. }) => Class::Io,
            CoreError::Dataset(_) => Class::Data,
            CoreError::Checkpoint { .. } => Class::Data,
            _ => Class::Internal,
        };
        CliError::new(class, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
