use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// A named structural inequality on `f` or `g` fails at the witness point.
    #[error("assumption violated: {inequality} (witness s = {witness})")]
    AssumptionViolation { inequality: String, witness: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("Newton iteration diverged after {iters} iterations (residual {residual:e})")]
    NewtonDivergence { iters: usize, residual: f64 },

    #[error("singular Jacobian in {0}")]
    SingularJacobian(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The driver declines to run because a structural hypothesis is not met.
    #[error("refused: {0}")]
    Refused(String),

    #[error("config error at key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBasis(_) => "invalid_basis",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::InvalidProfile(_) => "invalid_profile",
            Error::AssumptionViolation { .. } => "assumption_violation",
            Error::NonFinite(_) => "non_finite",
            Error::NewtonDivergence { .. } => "newton_divergence",
            Error::SingularJacobian(_) => "singular_jacobian",
            Error::InvalidSolverConfig(_) => "invalid_solver_config",
            Error::InvalidInput(_) => "invalid_input",
            Error::Refused(_) => "refused",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
