use thiserror::Error;

/// Evidence that a dataset has no unique finite logistic minimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparabilityCertificate {
    /// A nonzero `w` with `x_i . w >= 0` for every (label-folded) example.
    Direction(Vec<f64>),
    /// Newton iterates left the norm bound while the gradient stalled.
    Divergence { norm: f64, grad_norm: f64 },
}

impl std::fmt::Display for SeparabilityCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeparabilityCertificate::Direction(w) => {
                write!(f, "separating direction w = {w:?} (every x_i . w >= 0)")
            }
            SeparabilityCertificate::Divergence { norm, grad_norm } => {
                write!(f, "Newton iterate norm {norm:.3e} exceeded the bound with gradient norm {grad_norm:.3e}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is separable: {0}")]
    Separable(SeparabilityCertificate),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("gradient descent diverged at step {step} (norm {norm:e})")]
    Diverged { step: usize, norm: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("dimension {dim} exceeds the materialization limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("map is monotone: no stationary points (lambda/gamma = {ratio} > 1/4)")]
    NoStationaryPoints { ratio: f64 },

    #[error("bisection bracket could not be established for {0}")]
    BracketFailure(&'static str),

    #[error("lemma {lemma} violated at w = {w} (margin {margin:e})")]
    LemmaViolation { lemma: u8, w: f64, margin: f64 },

    #[error("spectrum window {window} invalid for series of length {len}")]
    InvalidWindow { window: usize, len: usize },

    #[error("csv parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
