use thiserror::Error;

/// Errors produced by the numerical stages and the pipeline driver.
#[derive(Debug, Error)]
pub enum KgError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("genericity inconclusive: {0}")]
    GenericityInconclusive(String),

    #[error("profile exceeds the supported regularity: {0}")]
    Regularity(String),

    #[error("data does not satisfy the spectral constraints: {0}")]
    Constraint(String),

    #[error("data violates the smallness budget: {0}")]
    Budget(String),

    #[error("shooting bracket failed: {0}")]
    Bracket(String),

    #[error("solution blew up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("unexpected escape from the stable manifold at t = {t}")]
    Escaped { t: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("acceptance threshold violated: {0}")]
    Threshold(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl KgError {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            KgError::Config(_)
            | KgError::InvalidParameter(_)
            | KgError::Budget(_)
            | KgError::Constraint(_) => 2,
            KgError::Bracket(_) => 3,
            KgError::BlowUp { .. } | KgError::Escaped { .. } => 4,
            KgError::Threshold(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, KgError>;
