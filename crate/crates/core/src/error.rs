use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Enumeration too large to carry out in memory/time.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The block that must be inverted for a chart map is singular or
    /// too badly conditioned.
    #[error("chart violation: {block} block has condition number {condition:.3e} (limit {limit:.1e})")]
    ChartViolation {
        block: &'static str,
        condition: f64,
        limit: f64,
    },

    /// A start solution has a kernel of dimension two or more.
    #[error("degenerate start system: divisor {index} has a kernel of dimension >= 2 (sigma ratio {ratio:.3e})")]
    DegenerateStart { index: usize, ratio: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
