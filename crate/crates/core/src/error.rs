use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} needs {size} entries, over the cap of {cap}")]
    SpaceTooLarge {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("graph is disconnected; filtering engines need a connected field")]
    Disconnected,

    #[error("observation has zero likelihood under the predicted law")]
    DegenerateEvidence,

    #[error("block {block} has all-zero weights for the current observation")]
    DegenerateBlock { block: usize },

    #[error("conditioning event at site {site} has zero probability")]
    DegenerateConditioning { site: usize },

    #[error("bias bound rate β = {value} is not positive; the mixing constant is too small")]
    NonPositiveRate { value: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
