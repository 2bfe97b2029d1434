use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot build a sphere point from a vector of norm {norm:e}")]
    DegenerateVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("points are antipodal (|x + y| = {gap:e})")]
    Antipodal { gap: f64 },

    #[error("parameter {value} outside of {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("speed {speed} too close to the conjugate limit pi/2 (sin(2 speed) = {sine:e})")]
    ConjugatePoint { speed: f64, sine: f64 },

    #[error("operation requires a non-degenerate geodesic segment")]
    DegenerateSegment,

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("eigenvalue {value} outside the operator cone {cone}")]
    Cone { value: f64, cone: &'static str },

    #[error(
        "newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    MaxIter { iterations: usize, residual: f64 },

    #[error("singular pivot in banded elimination at row {row}")]
    Singular { row: usize },

    #[error(
        "grid too coarse: need at least {min} nodes per direction, got nr={nr}, ntheta={ntheta}"
    )]
    GridTooCoarse {
        min: usize,
        nr: usize,
        ntheta: usize,
    },

    #[error("point at distance {distance} from the pole lies outside the cap of radius {radius}")]
    OutsideCap { distance: f64, radius: f64 },
}
