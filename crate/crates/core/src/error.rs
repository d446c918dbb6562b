use thiserror::Error;

/// Errors raised by the calculus, the DGLA layer and the analyses built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operands live on different domains")]
    DomainMismatch,
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid complex structure: {0}")]
    InvalidComplexStructure(String),
    #[error("degree overflow: {left} + {right} exceeds dimension {dim}")]
    DegreeOverflow { left: usize, right: usize, dim: usize },
    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error("{op} does not support degree {degree}")]
    UnsupportedDegree { op: &'static str, degree: usize },
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("grid resolution {grid} too coarse for bandwidth {bandwidth}")]
    GridTooCoarse { grid: usize, bandwidth: usize },
    #[error("denominator {value:e} at grid point {point:?} is not above threshold {threshold:e}")]
    VanishingDenominator { point: Vec<f64>, value: f64, threshold: f64 },
    #[error("displacement too large for the sampling grid: {0}")]
    Aliasing(String),
    #[error("form is not in Z (contraction with X has size {0:e})")]
    NotInZ(f64),
    #[error("invalid defining couple: {0}")]
    InvalidCouple(String),
    #[error("couple is not integrable (Frobenius residual {0:e})")]
    NotIntegrable(f64),
    #[error("operator leaves the truncated space at frequency {0:?}")]
    BandwidthOverflow(Vec<i32>),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
