use thiserror::Error;

pub type Result<T> = std::result::Result<T, LameError>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LameError {
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("poles {0} and {1} coincide within tolerance")]
    DegeneratePoles(usize, usize),
    #[error("degree mismatch: {0}")]
    DegreeError(String),
    #[error("point {0} is a singular point of the problem")]
    SingularPoint(String),
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("singular Jacobian in {0}")]
    SingularJacobian(&'static str),
    #[error("zeros {0} and {1} coincide within tolerance")]
    CoincidentZeros(usize, usize),
    #[error("not a Stieltjes instance: {0}")]
    NotStieltjesCase(String),
    #[error("path passes through a singularity near {0}")]
    PathThroughSingularity(String),
    #[error("trajectory start {0} is a singular point")]
    StartAtSingularity(String),
    #[error("cycle passes through a singularity near {0}")]
    CycleThroughSingularity(String),
    #[error("mass vector leaves the cell: {0}")]
    OutOfCell(String),
    #[error("level-set continuation stalled at {0}")]
    ContinuationLost(String),
    #[error("test point {0} is closer than the distance floor to the support")]
    TestPointTooClose(String),
    #[error("zeros could not be assigned to carrying arcs: {0}")]
    ArcAssignmentFailed(String),
    #[error("quadratic differential is not closed: {0}")]
    NotClosed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub(crate) fn fmt_c(z: num_complex::Complex64) -> String {
    format!("({:.6e}, {:.6e})", z.re, z.im)
}
