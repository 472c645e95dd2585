use thiserror::Error;

/// Library-level error type.
///
/// `Validation` covers rejected inputs (degenerate intervals, bad grammar,
/// out-of-range parameters). `NonConvergence` covers numerical failures
/// (quadrature that stalls at the node cap, exchange stagnation, bracketing
/// failures); these carry the last two estimates where meaningful.
#[derive(Error, Debug)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("non-convergence in {what}: successive estimates {prev} and {last}")]
    NonConvergence { what: String, prev: f64, last: f64 },

    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn non_convergence(what: impl Into<String>, prev: f64, last: f64) -> Self {
        Error::NonConvergence {
            what: what.into(),
            prev,
            last,
        }
    }
}
