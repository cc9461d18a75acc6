use asrl_core::{DataError, LossError, MetricError, TrainError};
use thiserror::Error;

/// Every failure maps to one exit code and one greppable tag.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Internal(_) => 4,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Usage(_) => "E_USAGE",
            Self::Data(_) => "E_DATA",
            Self::Internal(_) => "E_INTERNAL",
        }
    }

    /// `error[E_TAG]: message` on a single line.
    pub fn render(&self) -> String {
        let text = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.tag(), text.trim())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        Self::Data(format!("cannot evaluate test set: {e}"))
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(msg) => Self::Usage(msg),
            other => Self::Internal(other.to_string()),
        }
    }
}
