use thiserror::Error;

/// Errors raised by model construction, propagation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("charge configuration is outside the physical subspace: {0}")]
    UnphysicalSector(String),

    #[error("propagation failed at t = {time}: {reason}")]
    PropagationFailure { time: f64, reason: String },

    #[error("steady state undefined: {0}")]
    NoSteadyState(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
