//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the calibration toolkit.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A vector had the wrong length for the space or metric set it met.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A coordinate fell outside its parameter's declared bounds.
    #[error("parameter `{name}` = {value} outside [{lower}, {upper}]")]
    OutOfDomain {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    /// Invalid argument or configuration.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact duplicate of an existing design point was inserted.
    /// Duplicates are rejected because they make emulator covariance
    /// matrices singular.
    #[error("duplicate design point at record {index}")]
    DuplicatePoint { index: usize },

    /// Candidate filtering exhausted its draw budget without a single
    /// acceptance. This is a signal about the problem, not a crash: either
    /// the criterion admits no parameters or the emulator has ruled out
    /// everything.
    #[error("no plausible candidates found after {draws} draws{}", wave.map(|w| format!(" (wave {w})")).unwrap_or_default())]
    EmptyPlausibleSet { draws: usize, wave: Option<u32> },

    /// Every simulator run in a batch failed; nothing to compute with.
    #[error("all {attempted} simulator runs failed")]
    NoCompletedRuns { attempted: usize },

    /// Emulator fitting failed for a metric.
    #[error("emulator fit failed for metric `{metric}`: {reason}")]
    FitFailure { metric: String, reason: String },

    /// Numerical conditioning problem outside acceptable round-off.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested operation needs a Gaussian-process emulator.
    #[error("unsupported emulator: {0}")]
    UnsupportedEmulator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
