use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),

    #[error("tabulated kernel covers |tau| <= {covered}, but tau = {requested} was requested")]
    KernelRange { requested: f64, covered: f64 },

    #[error("covariance is not positive semidefinite even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("trajectory norm overflowed at t = {time}")]
    Overflow { time: f64 },

    #[error("driving noise is unidentifiable at step {step}: coupling annihilates the state")]
    UnidentifiableNoise { step: usize },

    #[error("time {time} is not a node of the grid")]
    OffGrid { time: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
