use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density has negative value {value} in cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("density mass {mass} differs from 1 by more than {tol}")]
    NotNormalized { mass: f64, tol: f64 },

    #[error("density has zero total mass")]
    ZeroMass,

    #[error("quantile values are not nondecreasing at index {index}")]
    NonMonotoneQuantile { index: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("coordinate map left the tabulated range of alpha at y = {y}")]
    YRangeExhausted { y: f64 },

    #[error("support escapes the coordinate window: {0}")]
    WindowOverflow(String),

    #[error("constant nonzero convection coefficient is not admissible (not integrable, the coordinate map blows up)")]
    ConstantConvection,

    #[error("coefficient bound violated: {0}")]
    BoundViolated(String),

    #[error("adjoint function requires xi > 0, got {0}")]
    NonPositiveSlope(f64),

    #[error("CFL restriction violated: dt = {dt} exceeds the stable step {recommended}")]
    CflViolation { dt: f64, recommended: f64 },

    #[error("test function support leaves the data window: {0}")]
    SupportOutsideWindow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("JKO step failed: {0}")]
    StepFailed(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
