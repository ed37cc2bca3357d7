use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its constraint; `key` names the offending field.
    Invalid { key: &'static str, reason: String },
    UnsupportedDimension(u32),
    GridMismatch,
    /// Scaling factor outside the configured interpolation window.
    Window { factor: f64, lo: f64, hi: f64 },
    /// A quantity that must be nonzero vanished.
    Degenerate(&'static str),
    NotOnTorus { component: &'static str, norm: f64, target: f64 },
}

impl Error {
    pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { key, reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid { key, reason } => write!(f, "invalid `{key}`: {reason}"),
            Error::UnsupportedDimension(n) => write!(f, "dimension N={n} is not supported (expected 3 or 4)"),
            Error::GridMismatch => f.write_str("fields live on different grids"),
            Error::Window { factor, lo, hi } => {
                write!(f, "scaling factor {factor} outside window [{lo}, {hi}]")
            }
            Error::Degenerate(what) => write!(f, "degenerate input: {what}"),
            Error::NotOnTorus { component, norm, target } => {
                write!(f, "component {component} has L2 norm {norm}, expected {target}")
            }
        }
    }
}

impl core::error::Error for Error {}
