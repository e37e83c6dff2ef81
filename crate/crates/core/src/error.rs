use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{quantity} requires a bounded activation, {activation} is unbounded")]
    UnboundedActivation {
        quantity: &'static str,
        activation: String,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("batch index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("run diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("rate fit failed: {0}")]
    RateFit(String),

    #[error("tail mass outside the box is {ratio:e} of Z (limit {limit:e})")]
    TailMass { ratio: f64, limit: f64 },

    #[error("quadrature unresolved: relative change {rel:e} under grid doubling")]
    Quadrature { rel: f64 },

    #[error("V_s infimum outside radius {radius} is {inf} (must be positive)")]
    NonPositiveInfimum { radius: f64, inf: f64 },

    #[error("spectral gap unstable under refinement: {coarse} vs {fine}")]
    GridTooCoarse { coarse: f64, fine: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("bad IDX magic {0:#010x}")]
    BadMagic(u32),

    #[error("truncated IDX file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("IDX dimension product overflows")]
    DimensionOverflow,

    #[error("digit {0} not present in the labels file")]
    MissingDigit(u8),

    #[error("dataset has too few samples per class ({positive} positive, {negative} negative)")]
    TooFewSamples { positive: usize, negative: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
