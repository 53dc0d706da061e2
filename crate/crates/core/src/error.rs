use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Probability vector failed validation (negative, non-finite, bad mass).
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    /// Two objects that must share a support size do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A dense table would exceed the materialization limit.
    #[error("table of {entries} entries exceeds materialization limit {limit}")]
    TooLarge { entries: u64, limit: u64 },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An index falls outside its space.
    #[error("index {index} out of range [0, {bound})")]
    IndexOutOfRange { index: u64, bound: u64 },

    /// Distortion metric not in the supported set.
    #[error("unsupported distortion metric `{0}` (expected `tv` or `kl`)")]
    UnsupportedMetric(String),

    /// The message set is larger than the sequence space.
    #[error("message set size m = {m} exceeds sequence space size {n}")]
    MessageSetTooLarge { m: u64, n: u64 },

    /// Brute-force routines refuse instances beyond their cost budget.
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    /// Every point of an exponent fit had zero observed errors.
    #[error("all points censored: no observed errors at any length")]
    Censored,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
