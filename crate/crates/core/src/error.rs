use alloc::string::String;

/// Errors raised by the solver and its helpers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("transport distance is infinite (labels differ under a frozen-label cost)")]
    InfiniteDistance,

    #[error("support box has zero diameter")]
    DegenerateSupport,

    #[error("invalid support box: {0}")]
    InvalidSupport(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sample source exhausted after {drawn} draws ({needed} required)")]
    SourceExhausted { drawn: usize, needed: usize },

    #[error("grid oracle supports at most {max} searched dimensions, got {dim}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("covariance matrix is not positive semidefinite")]
    InvalidCovariance,

    #[error("radius {rho} is not below the support diameter {diameter}")]
    RadiusExceedsDiameter { rho: f64, diameter: f64 },

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
