use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("Helmholtz shift must be positive, got {0}")]
    NonpositiveShift(f64),
    #[error("potential is not positive: minimum sampled value {0}")]
    NonpositivePotential(f64),
    #[error("field is identically zero")]
    ZeroField,
    #[error("field is not in the restricted set (quadratic defect {0} >= 0)")]
    NotInTheta(f64),
    #[error("ray never crosses the Nehari manifold (positive-part defect {0} >= 0)")]
    NoNehariPoint(f64),
    #[error("seed is not in the restricted set (quadratic defect {0} >= 0)")]
    SeedNotInTheta(f64),
    #[error("line search failed {0} consecutive times")]
    Diverged(usize),
    #[error("limit level a = {a} must satisfy 0 < a < l0 = {l0}")]
    SlopeOrdering { a: f64, l0: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid with {points} points exceeds budget {budget}")]
    BudgetExceeded { points: usize, budget: usize },
    #[error("boxes overlap: {0}")]
    OverlappingBoxes(String),
    #[error("box {index} boundary does not separate: min V on boundary {boundary_min} <= {threshold}")]
    BoundaryNotSeparating {
        index: usize,
        boundary_min: f64,
        threshold: f64,
    },
    #[error("seed left the restricted set (quadratic defect {0} >= 0)")]
    SeedLeftTheta(f64),
    #[error("branch {0} escaped its box")]
    BranchEscaped(usize),
    #[error("decay window contains only {0} shells (need 8)")]
    WindowTooSmall(usize),
    #[error("field is not positive on the decay window")]
    NonpositiveTail,
    #[error("no interior branch solutions")]
    NoInteriorSolutions,
    #[error("config error: {0}")]
    Config(String),
    #[error("hypothesis validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
