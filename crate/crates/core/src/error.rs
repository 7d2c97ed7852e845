use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input that violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("denoiser failure: {message}")]
    Denoiser {
        message: String,
        /// Captured standard error of a plugin child, if any.
        diagnostics: Option<String>,
    },

    #[error("invalid sampler configuration: {0}")]
    Config(String),

    #[error("chain diverged at iteration {iteration}: non-finite state")]
    Divergence { iteration: usize },

    #[error("unsupported operator for {context}: {variant}")]
    UnsupportedOperator {
        context: &'static str,
        variant: &'static str,
    },

    #[error("step size {gamma} violates {bound_name} (bound {bound})")]
    StepSize {
        gamma: f64,
        bound: f64,
        bound_name: &'static str,
    },

    #[error("linear recursion is not contractive (spectral radius {radius}) at gamma = {gamma}")]
    NonContractive { radius: f64, gamma: f64 },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("dense size guard exceeded: n = {n} > {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("malformed image data: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
