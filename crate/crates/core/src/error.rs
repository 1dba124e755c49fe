use thiserror::Error;

use crate::levelset::TraversalError;

pub type Result<T, E = AmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AmError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("grid spacing must lie in (0, 2], got {0}")]
    InvalidSpacing(f64),
    #[error("grid too large: {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: f64, cap: usize },
    #[error("evaluation failure at {point:?}")]
    Evaluation { point: Vec<f64> },
    #[error("evaluation failure at grid index {index} ({point:?})")]
    FieldEvaluation { index: usize, point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("trace stalled at start: zero gradient at the sample nearest {point:?}")]
    StalledAtStart { point: Vec<f64> },
    #[error("degenerate manifold: fewer than two distinct points")]
    DegenerateManifold,
    #[error(
        "degenerate abscissae: {distinct} distinct values cannot determine a degree {degree} fit"
    )]
    DegenerateAbscissae { distinct: usize, degree: usize },
    #[error("degree {degree} too large (cap {cap})")]
    DegreeTooLarge { degree: usize, cap: usize },
    #[error("{pairs} pairs are too few for a degree {degree} fit")]
    TooFewPairs { pairs: usize, degree: usize },
    #[error("undefined gradient direction (zero normal)")]
    UndefinedGradientDirection,
    #[error("segment tangent to level set")]
    SegmentTangent,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Traversal(#[from] TraversalError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AmError {
    /// True for failures of the numerical pipeline, as opposed to bad
    /// input, bad configuration or I/O.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            AmError::InvalidConfig(_)
                | AmError::Format { .. }
                | AmError::Io(_)
                | AmError::Json(_)
                | AmError::InvalidSpacing(_)
                | AmError::ZeroDimension
                | AmError::GridTooLarge { .. }
                | AmError::DimensionMismatch { .. }
                | AmError::DegreeTooLarge { .. }
        )
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        AmError::Format {
            line,
            message: message.into(),
        }
    }
}
