use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("defective spectrum: {0}")]
    Defective(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("not a density matrix: {0}")]
    NotDensity(String),
    #[error("optimization diverged: {0}")]
    Diverged(String),
    #[error("stability bound violated: m^2 = {0} < -1/4")]
    StabilityBound(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable kebab-case name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NonFinite(_) => "non-finite",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Defective(_) => "defective",
            Error::Unsupported(_) => "unsupported",
            Error::NotDensity(_) => "not-density",
            Error::Diverged(_) => "diverged",
            Error::StabilityBound(_) => "stability-bound",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Budget(_) => "budget",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
