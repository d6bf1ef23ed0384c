use thiserror::Error;

/// Errors produced by the estimators, designs and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error(
        "too many blocks for sample size: {blocks} blocks requested for {n_total} observations"
    )]
    TooManyBlocks { blocks: u64, n_total: usize },

    #[error("block plan built for {plan_total} observations but batch has {batch_total}")]
    PlanMismatch {
        plan_total: usize,
        batch_total: usize,
    },

    #[error("design too large; use subsampled variant ({count} subsets exceed cap {cap})")]
    DesignTooLarge { count: String, cap: u64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
