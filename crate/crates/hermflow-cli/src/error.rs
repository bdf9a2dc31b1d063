//! CLI error type and the exit-code contract:
//! 0 success, 1 validation failure, 2 numerical-drift failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical drift: {0}")]
    Drift(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Drift(_) => 2,
        }
    }
}

impl From<hermflow_core::Error> for CliError {
    fn from(e: hermflow_core::Error) -> Self {
        match &e {
            hermflow_core::Error::Drift { .. } => CliError::Drift(e.to_string()),
            hermflow_core::Error::FieldPoints { failures }
                if failures
                    .iter()
                    .any(|(_, err)| matches!(err, hermflow_core::Error::Drift { .. })) =>
            {
                CliError::Drift(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json error: {e}"))
    }
}
