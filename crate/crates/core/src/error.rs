use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quantization overflow: {value} at scale 2^-{scale} does not fit a 64-bit mantissa")]
    MantissaOverflow { value: f64, scale: u32 },

    #[error("scale {scale} exceeds the maximum supported dyadic scale {max}")]
    ScaleTooLarge { scale: u32, max: u32 },

    #[error("non-finite value {0} cannot be quantized")]
    NonFinite(f64),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scan over C({p},{k}) = {needed} column subsets exceeds the budget of {budget}; use a smaller (p, k)")]
    BudgetExceeded { p: usize, k: usize, needed: u128, budget: u64 },

    #[error("rejection sampler exceeded {0} proposals")]
    RejectionCapExceeded(usize),

    #[error("coin stream exhausted: requested bits [{offset}, {end}) of {available}")]
    CoinsExhausted { offset: u64, end: u64, available: u64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical routine failed: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
