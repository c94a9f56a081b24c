use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    Argument(String),
    /// A configuration value is unsupported or out of range.
    Configuration(String),
    /// An object was used outside its contract (stale cache, step after done).
    Contract(String),
    /// A computation produced NaN or infinity.
    NonFinite(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Configuration(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! arg_err {
    ($($t:tt)*) => { $crate::error::Error::Argument(alloc::format!($($t)*)) };
}
pub(crate) use arg_err;
