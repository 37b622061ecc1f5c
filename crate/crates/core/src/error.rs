use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sphere point: {0}")]
    InvalidPoint(String),
    #[error("chart breakdown: {0}")]
    ChartBreakdown(String),
    #[error("point outside the cylinder: y = {0}")]
    OutOfCylinder(f64),
    #[error("y = 0 lies on the fixed set of the handle involution")]
    FixedSet,
    #[error("point lies inside deleted cap {hole} (distance {distance:e} < {radius:e})")]
    DeletedRegion { hole: usize, distance: f64, radius: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate packing: {0}")]
    DegeneratePacking(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("meshing failure: {0}")]
    Meshing(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("assembly error in triangle {triangle}: {reason}")]
    Assembly { triangle: usize, reason: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("scaling violation: {0}")]
    ScalingViolation(String),
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
