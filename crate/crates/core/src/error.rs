//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A preset file is malformed or inconsistent.
    #[error("preset error: {0}")]
    Preset(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A persisted results table could not be parsed.
    #[error("results table error: {0}")]
    Results(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
