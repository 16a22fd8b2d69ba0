use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("smoothing parameter must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("spatial gradient of a Heaviside network vanishes almost everywhere")]
    HeavisideNotDifferentiable,
    #[error("line {index} has a zero normal vector")]
    DegenerateLines { index: usize },
    #[error("need at least {required} lines, got {found}")]
    TooFewLines { required: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("sign pattern has length {found}, model has {expected} level-set functions")]
    PatternLengthMismatch { expected: usize, found: usize },
    #[error("region masks do not partition the grid at pixel {pixel}")]
    NonPartition { pixel: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(&'static str),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("grid evolution supports 1 or 2 level-set functions, got {0}")]
    UnsupportedPhases(usize),
    #[error("level-set field became non-finite at step {step}")]
    UnstableStep { step: usize },
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDims { width: usize, height: usize },
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("pixel {index} has value {value}, expected a finite value in [0, 1]")]
    PixelOutOfRange { index: usize, value: f64 },
    #[error("non-finite parameter")]
    NonFinite,
}
