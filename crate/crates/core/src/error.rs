use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NdError {
    /// A configuration value is outside its valid range.
    #[error("configuration error: {0}")]
    Config(String),
    /// A function was called outside the domain where its formula holds.
    #[error("domain error: {0}")]
    Domain(String),
    /// A simulation invariant was observed to be broken.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, NdError>;
