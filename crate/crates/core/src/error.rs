use thiserror::Error;

/// Errors produced by the ROSAR toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("phase-center index {index} out of range for N = {count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("target range {range} m must exceed the rotation radius {radius} m")]
    TargetInsideRotor { range: f64, radius: f64 },

    #[error("range {range} m is beyond the unambiguous range {max} m")]
    BeyondUnambiguousRange { range: f64, max: f64 },

    #[error("empty aperture window")]
    EmptyWindow,

    #[error("empty sidelobe grid")]
    EmptySidelobeGrid,

    #[error("data matrix kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no weight-table entry for range bin {0}")]
    MissingBin(usize),

    #[error("weight-table entry for range bin {0} is not verified")]
    UnverifiedBin(usize),

    #[error("column window [{start}, {end}] falls outside the recorded pulses (0..{pulses})")]
    WindowOutOfData { start: i64, end: i64, pulses: usize },

    #[error("range bin {bin} outside [0, {bins})")]
    RangeBinOutOfRange { bin: i64, bins: usize },

    #[error("conic solver failed at SCA iteration {iteration}: {reason}")]
    Solver { iteration: usize, reason: String },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("pixel ({row}, {col}): {source}")]
    Pixel {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
