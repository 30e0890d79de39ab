use thiserror::Error;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Numerics(#[from] rho1d::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration errors (including parameters the numerics reject), 3 for solvers that did not converge,
    /// 4 for failed verifications, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Numerics(rho1d::Error::DomainMismatch(_))
            | CliError::Numerics(rho1d::Error::InvalidParameter(_))
            | CliError::Numerics(rho1d::Error::InvalidGrid(_))
            | CliError::Numerics(rho1d::Error::UnsanctionedIndex(_)) => 2,
            CliError::NoConvergence(_) => 3,
            CliError::Numerics(rho1d::Error::NoConvergence { .. })
            | CliError::Numerics(rho1d::Error::NotConverged(_))
            | CliError::Numerics(rho1d::Error::NonPositiveIterate(_)) => 3,
            CliError::Verification(_) => 4,
            _ => 1,
        }
    }
}
