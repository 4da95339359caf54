//! Error type shared by all estimation stages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on arguments was violated (lengths, ranges, counts).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A model failed the stability requirement at construction.
    #[error("unstable model: {context} has spectral radius {rho:.6} (requires < 1)")]
    Unstable { context: &'static str, rho: f64 },

    /// An estimated predictor matrix left the stability region.
    #[error(
        "estimated predictor matrix is unstable (spectral radius {rho:.6}); \
         increase the sample size or revisit the model order"
    )]
    UnstableEstimate { rho: f64 },

    /// A linear solve met an exactly singular matrix.
    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    /// A matrix was too ill-conditioned to trust the solve.
    #[error("{context} is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { context: &'static str, condition: f64 },

    /// The requested order has no support in the data (rank collapse).
    #[error("degenerate order: {0}")]
    DegenerateOrder(String),

    /// An iterative update produced a non-finite value.
    #[error("non-finite update at {context} iteration {iteration}")]
    NonFinite {
        context: &'static str,
        iteration: usize,
    },

    /// The fit score is undefined for a constant reference response.
    #[error("fit score undefined: reference response has zero variation")]
    UndefinedFit,

    /// Aggregation got no successful trials to summarize.
    #[error("all {0} trials failed; nothing to aggregate")]
    AllTrialsFailed(usize),

    /// A trajectory file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Shorthand used across the crate for precondition failures.
pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::invalid(msg))
}
