//! Error type shared by the core modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument violated a mathematical precondition (non-positive loss,
    /// negative SINR, empty coefficient set, ...).
    Domain(String),
    /// The problem structure is invalid (assignment violating the
    /// one-slot-per-user rule, capacity exceeded, shape mismatch).
    Structure(String),
    /// A closed form is undefined at the current multipliers and the caller
    /// must fall back to the projection path.
    SplitFallback,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Structure(msg) => write!(f, "structure error: {msg}"),
            Error::SplitFallback => write!(f, "split closed form undefined; fallback required"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn structure(msg: impl Into<String>) -> Error {
    Error::Structure(msg.into())
}
