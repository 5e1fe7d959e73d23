use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, sizes or basis targets that do not fit together.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Zero density where a velocity `u = rho_u / rho` is needed.
    #[error("zero density at site {site}")]
    ZeroDensity { site: usize },

    #[error("singular extraction system (condition number {cond:e})")]
    Singular { cond: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Coefficients reused on a lattice with different dx, dt or omega.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("problem too large: {unknowns} unknowns exceeds limit {limit}")]
    TooLarge { unknowns: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
