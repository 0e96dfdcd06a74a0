use thiserror::Error;

/// Errors produced by the systemic-risk library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("invalid liabilities: {0}")]
    Validation(String),

    #[error("clearing did not converge after {iterations} iterations (step {last_step:e})")]
    Convergence {
        iterations: usize,
        last_step: f64,
        last_iterate: Vec<f64>,
    },

    #[error("singular clearing system for defaulting set {defaulting:?}")]
    Singular { defaulting: Vec<usize> },

    #[error(
        "the all-eligible system is not acceptable; the boundary bisection needs 1 to be a member, use full_grid_scan instead"
    )]
    NotFeasible,

    #[error("monetary search box error: {0}")]
    Box(String),

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag used by the CLI error document.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::Matrix(_) => "matrix",
            Error::Validation(_) => "validation",
            Error::Convergence { .. } => "convergence",
            Error::Singular { .. } => "singular",
            Error::NotFeasible => "not_feasible",
            Error::Box(_) => "box",
            Error::Resolution(_) => "resolution",
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
