//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised while loading data, computing statistics or factors.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, detected before any data is touched.
    #[error("config error: {0}")]
    Config(String),

    /// A file could not be parsed.
    #[error("format error in {path} at line {line}: {message}")]
    Format {
        path: String,
        line: u64,
        message: String,
    },

    /// Parsed data violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Index sets (alphas, stocks, dates) do not line up.
    #[error("index error: {0}")]
    Index(String),

    /// Not enough trading days for the requested window.
    #[error("insufficient history: need at least {required} days, got {actual}")]
    InsufficientHistory { required: usize, actual: usize },

    #[error("no dead alphas")]
    NoDeadAlphas,

    #[error("no good alphas")]
    NoGoodAlphas,

    #[error("zero spectrum")]
    ZeroSpectrum,

    #[error("zero expected returns")]
    ZeroExpectedReturns,

    /// Eigensolver failure, ill-conditioning, failed factorization.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Format { .. } => "format",
            Self::Validation(_) => "validation",
            Self::Index(_) => "index",
            Self::InsufficientHistory { .. } => "insufficient_history",
            Self::NoDeadAlphas => "no_dead_alphas",
            Self::NoGoodAlphas => "no_good_alphas",
            Self::ZeroSpectrum => "zero_spectrum",
            Self::ZeroExpectedReturns => "zero_expected_returns",
            Self::Numerical(_) => "numerical",
            Self::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 config, 3 data validation, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) | Self::ZeroSpectrum => 4,
            _ => 3,
        }
    }
}
