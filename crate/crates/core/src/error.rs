use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),

    #[error("{0} is not a prime field order")]
    NotPrime(u32),

    #[error("zero has no multiplicative inverse")]
    DivisionByZero,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("field too small: q = {q}, need q > {needed}")]
    FieldTooSmall { q: u32, needed: usize },

    #[error("insufficient data: have {have} symbols, need {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("inconsistent observations")]
    Inconsistent,

    #[error("decode failure: {0}")]
    DecodeFailure(String),

    #[error("invalid network parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported parameters: {0}")]
    UnsupportedParams(String),

    #[error("invalid Z1/Z2 pair for this cut: {0}")]
    InvalidCutSelection(String),

    #[error("attack precondition not met: {0}")]
    AttackPrecondition(String),

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("malformed key blob: {0}")]
    KeyFormat(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
