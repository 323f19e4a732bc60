use std::fmt;

use selfonn_core::error::WeightFileError;
use selfonn_core::Error;

/// Process exit status per failure class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Success = 0,
    /// Internal or otherwise unclassified failure.
    Failure = 1,
    /// Bad flags, bad config file, or a model/run config that cannot work.
    Usage = 2,
    Io = 3,
    /// Malformed or inconsistent data files.
    Data = 4,
    /// Non-finite loss during training.
    Divergence = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Io, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::WeightFile(WeightFileError::ConfigMismatch(_)) => ExitCode::Usage,
            Error::Io { .. } => ExitCode::Io,
            Error::Input(_) | Error::Dimension(_) | Error::Pgm(_) | Error::WeightFile(_) => ExitCode::Data,
            Error::Divergence { .. } => ExitCode::Divergence,
            Error::Consistency(_) => ExitCode::Failure,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new(ExitCode::Failure, format!("report serialization failed: {e}"))
    }
}
