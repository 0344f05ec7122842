use thiserror::Error;

/// Errors raised by the estimators and drivers in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or series did not reach its requested tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A Monte Carlo estimate is statistically unusable (e.g. effective sample size collapsed).
    #[error("unreliable estimate: {0}")]
    Unreliable(String),

    /// Moment order too high for a heavy-tailed Monte Carlo estimator.
    #[error("heavy-tail warning: moment order {order} exceeds the supported maximum {max}")]
    HeavyTail { order: usize, max: usize },

    /// The lattice evolution produced a non-finite or exploding field.
    #[error("lattice run aborted at step {step}: {reason}")]
    Aborted { step: usize, reason: String },

    /// Invalid run configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable class name, used in CLI error output.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::Unreliable(_) => "unreliable",
            Error::HeavyTail { .. } => "heavy-tail",
            Error::Aborted { .. } => "aborted",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
