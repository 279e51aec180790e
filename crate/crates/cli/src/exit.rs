//! Process exit codes and the error type carrying them.

use std::fmt;
use std::process::ExitCode;

use wgflow::Error;

pub const ORACLE_MISMATCH: u8 = 1;
pub const CONFIG: u8 = 2;
pub const MONOTONICITY: u8 = 3;
pub const IO: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(CONFIG, message)
    }

    pub fn io(message: impl fmt::Display) -> Self {
        Self::new(IO, message)
    }

    /// Maps a library error to the exit code of its category.
    pub fn from_core(err: Error) -> Self {
        let code = match &err {
            Error::StepAborted { .. } | Error::NonMonotone { .. } | Error::NonFinite { .. } => MONOTONICITY,
            Error::Io { .. } | Error::Csv(_) => IO,
            _ => CONFIG,
        };
        Self::new(code, err)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
