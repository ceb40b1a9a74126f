use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid variance: {0} (must be positive and finite)")]
    InvalidVariance(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cell index {index} out of range for a {levels}-level quantizer")]
    IndexOutOfRange { index: usize, levels: usize },

    #[error("argument {value} outside domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("quantizer design failed: {0}")]
    DesignFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable kind, used in CLI error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidVariance(_) => "invalid_variance",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::Domain { .. } => "domain",
            Error::QuadratureNonConvergence(_) => "quadrature_nonconvergence",
            Error::Solver(_) => "solver",
            Error::DesignFailure(_) => "design_failure",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_variance(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidVariance(nu))
    }
}
