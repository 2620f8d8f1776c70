use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map onto the CLI exit codes: validation-type failures exit
/// with 2, budget failures with 3 and numerical failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("envelope violated: acceptance probability {0} exceeds 1")]
    EnvelopeViolation(f64),

    #[error("lipschitz bound violated: {0}")]
    LipschitzViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Precondition(_)
            | Error::Configuration(_)
            | Error::Capability(_)
            | Error::Json(_) => 2,
            Error::Budget(_) => 3,
            Error::Numerical(_) | Error::Oracle(_) | Error::EnvelopeViolation(_) | Error::LipschitzViolation(_) => 4,
            Error::Io(_) => 1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
