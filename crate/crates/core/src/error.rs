use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{function}: evaluation failed at {at}: {reason}")]
    Evaluation {
        function: &'static str,
        at: f64,
        reason: String,
    },

    #[error("quadrature on [{a}, {b}] did not converge: error estimate {estimate:e} exceeds {tolerance:e}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("kernel `{name}`: {reason}")]
    Kernel { name: String, reason: String },

    #[error("no occupation density: {0}")]
    NoDensity(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by the caller's configuration rather than by
    /// a numerical routine failing on valid input.
    pub fn is_config(&self) -> bool {
        !matches!(
            self,
            Error::Evaluation { .. } | Error::Quadrature { .. } | Error::NoDensity(_)
        )
    }

    pub(crate) fn eval(function: &'static str, at: f64, reason: impl Into<String>) -> Self {
        Error::Evaluation {
            function,
            at,
            reason: reason.into(),
        }
    }
}
