use thiserror::Error;

/// Errors raised by model construction, fitting and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("segmentation must have at least one level")]
    EmptySegmentation,

    #[error("dimension index {dim} out of range 1..={ambient}")]
    DimensionOutOfRange { dim: usize, ambient: usize },

    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    OutsideCube { index: usize, value: f64 },

    #[error("concentration a0 must be positive and finite, got {0}")]
    InvalidConcentration(f64),

    #[error("segmentation family is empty")]
    EmptyFamily,

    #[error("inconsistent segmentation family: {0}")]
    InconsistentFamily(String),

    #[error("depth {0} exceeds the supported maximum of {max}", max = crate::hbeta::MAX_DEPTH)]
    DepthTooLarge(usize),

    #[error("probability level {0} must lie in (0, 1)")]
    InvalidLevel(f64),

    #[error("malformed region: {0}")]
    MalformedRegion(String),

    #[error("conditional mass is zero in column {0}")]
    ZeroColumnMass(usize),

    #[error("operation requires a bivariate model, got dimension {0}")]
    NotBivariate(usize),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("encoding: {0}")]
    Encoding(String),
}

pub type Result<T> = std::result::Result<T, Error>;
