use thiserror::Error;

use crate::tree::DyadicInterval;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interval {interval} out of range for tree depth {depth}")]
    IntervalOutOfRange {
        interval: DyadicInterval,
        depth: u32,
    },

    #[error("interval {0} is a cell; an internal interval is required")]
    NotInternal(DyadicInterval),

    #[error("depth mismatch: {left} vs {right}")]
    DepthMismatch { left: u32, right: u32 },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("kernel entry at {interval} violates the size condition: |K|*|I| = {magnitude}")]
    SizeViolation {
        interval: DyadicInterval,
        magnitude: f64,
    },

    #[error("depth {depth} exceeds the dense materialization guard {guard}")]
    DepthGuard { depth: u32, guard: u32 },

    #[error("power iteration did not converge after {iterations} iterations (last value {value})")]
    NoConvergence { iterations: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
