use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields or measures live on different grids")]
    GridMismatch,
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("negative potential {value} at {point:?}")]
    NegativePotential { value: f64, point: Vec<f64> },
    #[error("expression error: {0}")]
    Expression(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("radius {radius} exceeds the usable radius {limit} of the grid box")]
    RadiusOutsideBox { radius: f64, limit: f64 },
    #[error("insufficient degrees of freedom: need {needed}, have {available}")]
    InsufficientDofs { needed: usize, available: usize },
    #[error("probe region at {center:?} leaves the grid box")]
    ProbeOutsideBox { center: Vec<f64> },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
