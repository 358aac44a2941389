use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("empty file: {0}")]
    EmptyFile(PathBuf),
    #[error("epoch duration {duration_s} s yields no complete epoch in {total_samples} samples")]
    DurationTooLong { duration_s: f64, total_samples: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid label value {value:?} on line {line}")]
    InvalidLabelValue { line: usize, value: String },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("band {low}-{high} Hz is outside (0, {nyquist}] Hz")]
    BandOutOfRange { low: f64, high: f64, nyquist: f64 },
    #[error("potato field is empty")]
    EmptyField,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cutoff {cutoff} Hz outside (0, {nyquist}) Hz")]
    CutoffOutOfRange { cutoff: f64, nyquist: f64 },
    #[error("signal of {len} samples is too short (need more than {min})")]
    TooShort { len: usize, min: usize },
    #[error("every FRMS sample is zero")]
    AllZeroSignal,

    #[error("covariance is rank deficient (smallest eigenvalue {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Karcher mean did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("distance {0} is not strictly positive")]
    NonPositiveDistance(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("p-value {0} outside (0, 1)")]
    OutOfRangeP(f64),

    #[error("knee detection needs at least {min} points, got {got}")]
    TooFewPoints { got: usize, min: usize },

    #[error("need at least {min} epochs, got {got}")]
    TooFewEpochs { got: usize, min: usize },
    #[error("only {survivors} epochs survive the outlier gate (need at least {min})")]
    TooFewCleanEpochs { survivors: usize, min: usize },

    #[error("pooled standard deviation is zero")]
    ZeroVariance,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}
