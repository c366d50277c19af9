use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("support violation: first argument has mass at {index} where the reference has none")]
    SupportViolation { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support has {atoms} atoms, above the cap of {cap}")]
    SupportCapExceeded { atoms: usize, cap: usize },

    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },

    #[error("alphabet size {0} must be even")]
    OddAlphabet(usize),

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
