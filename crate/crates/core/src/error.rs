use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input contained NaN or infinite entries.
    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    /// A result would leave the representable floating-point range.
    #[error("value out of range: {0}")]
    Range(String),

    /// A matrix that had to be positive definite was not (numerically).
    #[error("singular or non-positive-definite matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// An argument violated its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A statistical model could not be constructed (e.g. invalid metric coefficients).
    #[error("invalid model: {0}")]
    Model(String),

    /// An iterative estimator produced non-finite values.
    #[error("estimator diverged: {0}")]
    Divergence(String),

    #[error("training failed: {0}")]
    Training(String),

    /// Malformed configuration or data file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// I/O error annotated with the offending path.
    pub fn io_at(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", path.display())))
    }
}
