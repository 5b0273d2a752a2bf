use alloc::string::String;

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    /// An operand held a value outside the operation's domain (for example
    /// negative infinity in a linear-algebra operand).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate slice: {0}")]
    DegenerateSlice(String),
    /// Every connection feeding a max-plus output was removed.
    #[error("degenerate column {column}: no active finite connection")]
    DegenerateColumn { column: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
    /// A non-finite value showed up where training cannot continue.
    #[error("numeric fault: {0}")]
    NumericFault(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Dimension(alloc::format!($($arg)*))
    };
}

macro_rules! arg_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Argument(alloc::format!($($arg)*))
    };
}

pub(crate) use arg_err;
pub(crate) use dim_err;
