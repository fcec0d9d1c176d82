use thiserror::Error;

/// Errors reported by the localization pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("AR polynomial is unstable: root magnitude {0} >= 1")]
    UnstableModel(f64),
    #[error("polynomial must be monic (leading coefficient 1), got {0}")]
    NotMonic(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("frequency {freq_hz} Hz outside the open band (0, {nyquist_hz}) Hz")]
    OutOfBand { freq_hz: f64, nyquist_hz: f64 },
    #[error("record too short: {len} samples, need at least {min}")]
    ShortRecord { len: usize, min: usize },
    #[error("empty segment [{start}, {end})")]
    EmptySegment { start: usize, end: usize },
    #[error("penalty must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error("constant signal: penalty profile carries no scale")]
    NoPenaltyScale,
    #[error("segment-mean array is not piecewise constant ({changes} mean changes in {len} samples)")]
    NotPiecewiseConstant { changes: usize, len: usize },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
