use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Copula parameter outside the family's domain.
    #[error("parameter out of domain for {family}: {detail}")]
    ParameterDomain { family: String, detail: String },

    /// Malformed input data or evaluation point.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Evaluation at a point where the copula vanishes and a log or negative power is needed.
    #[error("boundary evaluation: {0}")]
    Boundary(String),

    /// The requested operation is not implemented for this family/dimension.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// API misuse (missing argument, parameter-free family, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration for cross-validation or an experiment.
    #[error("configuration error: {0}")]
    Config(String),

    /// Linear-algebra failure, e.g. a singular information matrix.
    #[error("numerical error: {detail} (condition number {condition_number:e})")]
    Numerical { detail: String, condition_number: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name of the variant, used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterDomain { .. } => "parameter_domain",
            Error::InvalidInput(_) => "invalid_input",
            Error::Boundary(_) => "boundary",
            Error::Unsupported(_) => "unsupported",
            Error::Usage(_) => "usage",
            Error::Config(_) => "config",
            Error::Numerical { .. } => "numerical",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
