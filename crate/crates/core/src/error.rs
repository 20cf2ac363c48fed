use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("all weights are zero")]
    AllZero,
    #[error("negative or non-finite weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("vocabulary size must be at least 2, got {0}")]
    VocabTooSmall(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("token {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },
    #[error("corpus of length {len} is too short for order {order}")]
    CorpusTooShort { len: usize, order: usize },
    #[error("bad n-gram order {0}")]
    BadOrder(usize),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("draft model sampled token {token} with probability {prob}")]
    DraftZeroProb { token: u32, prob: f64 },
    #[error("residual mass {0:e} is below the resampling threshold")]
    ZeroResidual(f64),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("too few samples: {0} (need at least {1})")]
    TooFewSamples(u64, u64),
    #[error("expected a positive value for {0}")]
    NonPositive(&'static str),
    #[error("no acceptance statistics")]
    EmptyStats,
    #[error("parse error: {0}")]
    Parse(String),
}
