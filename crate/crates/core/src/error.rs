use thiserror::Error;

use crate::loss::LossKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid classification label {0}; expected -1 or +1")]
    InvalidLabel(f64),

    #[error("sample is empty")]
    EmptySample,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("solver did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("matrix is singular or not positive definite")]
    NotPositiveDefinite,

    /// Every residual of a regression round is zero.
    #[error("perfect fit: maximum absolute error is zero")]
    PerfectFit,

    #[error("{lemma} bound violated: {value} > {bound}")]
    BoundViolation {
        lemma: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("loss {0:?} is not supported by this operation")]
    UnsupportedLoss(LossKind),

    #[error("label is constant; correlation with features is undefined")]
    ConstantLabel,

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
