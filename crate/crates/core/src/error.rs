use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Model coefficients violate the positivity / symmetry requirements.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An explicit stepper produced a negative density or otherwise lost accuracy.
    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("integration diverged: {0}")]
    Divergence(String),

    /// The covariance left the positive semidefinite cone.
    #[error("covariance lost positivity: {0}")]
    Stiffness(String),
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
