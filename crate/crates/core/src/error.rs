use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: total dimension {requested} exceeds the maximum of {limit}")]
    ResourceLimit { requested: usize, limit: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("divergent quantity: {0}")]
    Divergent(String),

    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("sampler failed: {0}")]
    Sampler(String),

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("malformed state container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
