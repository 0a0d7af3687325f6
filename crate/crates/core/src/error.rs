use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("undefined geometry: {0}")]
    UndefinedGeometry(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient lag coverage: {} of {total} lags empty ({empty:?})", empty.len())]
    InsufficientCoverage { empty: Vec<usize>, total: usize },

    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),

    #[error("kriging system singular after {attempts} solve attempts (last nugget {nugget:e})")]
    SingularSystem { attempts: usize, nugget: f64 },

    #[error("covariance not positive definite (minimum eigenvalue estimate {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("model document: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
