use thiserror::Error;

/// Errors raised by model construction and the exact computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter violates one of its invariants.
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    /// An enumerated state space would exceed the configured cap.
    #[error("state space of size {size} exceeds the cap {cap}")]
    Size { size: u128, cap: usize },

    /// The requested limit does not exist for this model.
    #[error("model error: {0}")]
    Model(String),

    /// A simulated population grew beyond the configured cap.
    #[error("population of {size} exceeds the cap {cap} at generation {generation}")]
    Truncation { size: u64, cap: u64, generation: usize },

    /// Two matrices that should share a state space do not.
    #[error("state space mismatch: {0}")]
    StateSpaceMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
