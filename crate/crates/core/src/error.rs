use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where a model is valid.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Least-squares fit failed; carries the best iterate found.
    #[error("fit failed: {message} (residual norm {residual_norm:e})")]
    Fit {
        message: String,
        best: Vec<f64>,
        residual_norm: f64,
    },

    #[error("not found: {0}")]
    NotFound(String),

    /// The static equilibrium branch ended in a fold (jump to contact).
    #[error("equilibrium lost at control force {requested:e} N; last stable force {last_stable_force:e} N")]
    Instability {
        requested: f64,
        last_stable_force: f64,
    },

    /// The integrator produced a non-finite state.
    #[error("integration diverged after t = {last_finite_time:e} s")]
    Divergence { last_finite_time: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable category used by the command line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::Fit { .. } => "fit",
            Error::NotFound(_) => "not-found",
            Error::Instability { .. } => "instability",
            Error::Divergence { .. } => "divergence",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
