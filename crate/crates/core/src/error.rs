use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("nothing to train: no set yields a positive pair")]
    NothingToTrain,

    #[error("requested rank {requested} exceeds matrix order {order}")]
    RankTooLarge { requested: usize, order: usize },

    #[error("truncated SVD did not converge after {iterations} iterations (max relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("representation variant {0} is not available for this model")]
    UnsupportedVariant(&'static str),

    #[error("unknown item {0:?}")]
    UnknownItem(String),

    #[error("empty evaluable set")]
    EmptyEvaluableSet,
}
