use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected} nodes, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("ill-conditioned steady-state gain (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("observer error matrix is not Hurwitz (max real eigenvalue {max_re:.4})")]
    NotHurwitz { max_re: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
