use thiserror::Error;

/// Failure modes shared across the crate.
///
/// The CLI maps `Certificate` to exit code 1 and everything else to 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("sampling self-check failed: {0}")]
    Sampling(String),
    #[error("indeterminate decision on square (n={n}, i={i}, j={j}): {reason}")]
    Indeterminate {
        n: usize,
        i: u128,
        j: u128,
        reason: String,
    },
    #[error("invalid tree-system: {0}")]
    TreeSystem(String),
    #[error("no rearrangement found (best normalized margin {best_margin:.6})")]
    NotFound { best_margin: f64 },
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
