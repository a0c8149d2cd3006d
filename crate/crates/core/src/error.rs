use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Each variant maps onto a stable, machine-parsable class name via
/// [`Error::class`], which the CLI prints on failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Dimension(String),

    #[error("no marginal correlation exceeds t* = {threshold}; lower the threshold below the largest |t_j| = {max_abs}")]
    EmptyScreen { threshold: f64, max_abs: f64 },

    #[error("requested {requested} components but only {available} are achievable")]
    Rank { requested: usize, available: usize },

    #[error("lasso did not converge after {sweeps} sweeps (last scaled change {max_change:.3e}, KKT violation {kkt_violation:.3e}, residual norm {residual_norm:.3e})")]
    Convergence {
        sweeps: usize,
        max_change: f64,
        kkt_violation: f64,
        residual_norm: f64,
    },

    #[error("{0}")]
    Infeasible(String),

    #[error("{0}")]
    Undefined(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Dimension(_) => "dimension",
            Error::EmptyScreen { .. } => "empty-screen",
            Error::Rank { .. } => "rank",
            Error::Convergence { .. } => "convergence",
            Error::Infeasible(_) => "infeasible",
            Error::Undefined(_) => "undefined",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
