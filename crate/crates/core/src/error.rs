use alloc::string::String;

/// Errors raised by the core computations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid model, table, or hyperparameter configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operation was applied to an object it does not support.
    #[error("usage error: {0}")]
    Usage(String),
    /// A detector ring that received no photons was asked for statistics.
    #[error("detector ring {0} has no detected photons")]
    EmptyRing(usize),
    /// Input data is malformed (lengths, ordering, missing values).
    #[error("data error: {0}")]
    Data(String),
    /// Something that must never happen did.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
