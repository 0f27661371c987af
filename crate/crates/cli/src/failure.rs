//! Command failures and their exit codes.

use std::fmt;

/// Bad input (exit 2) or a fault while producing output (exit 1).
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Failure::Invalid(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Internal(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "invalid input: {e:#}"),
            Failure::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

pub trait ResultExt<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}
