use thiserror::Error;
use toda_tba::TodaError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Parse(String),

    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },

    #[error(transparent)]
    Core(#[from] TodaError),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 2,
    NonConvergence = 3,
    Consistency = 4,
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Parse(_) | CliError::Validation { .. } | CliError::Output { .. } => ExitStatus::Validation,
            CliError::Core(e) => match e {
                TodaError::Validation { .. } => ExitStatus::Validation,
                TodaError::Solver { .. }
                | TodaError::Truncation { .. }
                | TodaError::ZeroCount { .. }
                | TodaError::Discretization { .. }
                | TodaError::GridTooSmall { .. } => ExitStatus::NonConvergence,
                TodaError::Consistency { .. }
                | TodaError::Domain(_)
                | TodaError::GammaPole { .. }
                | TodaError::SinhZero { .. }
                | TodaError::Pole { .. } => ExitStatus::Consistency,
            },
        }
    }

    /// Short machine-readable class used in error documents.
    pub fn kind(&self) -> &'static str {
        match self.status() {
            ExitStatus::Validation => "validation_error",
            ExitStatus::NonConvergence => "non_convergence",
            _ => "consistency_failure",
        }
    }
}
