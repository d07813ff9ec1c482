use thiserror::Error;

/// Errors raised across the solver suite.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("edge {edge} has non-positive or non-finite length {length}")]
    NonPositiveLength { edge: String, length: f64 },
    #[error("edge {edge} references unknown vertex {vertex}")]
    DanglingVertexReference { edge: String, vertex: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph description parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("interpolated values disagree at vertex {vertex}: {a} vs {b}")]
    ConflictingVertexValues { vertex: String, a: f64, b: f64 },
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("eigensolver did not converge in {max_iters} iterations (residual {residual:e})")]
    NoConvergence { max_iters: usize, residual: f64 },
    #[error("mass {actual} does not match prescribed mass {expected}")]
    MassMismatch { expected: f64, actual: f64 },
    #[error("no convergence within {max_iters} iterations (last residual {residual:e})")]
    MaxItersExceeded { max_iters: usize, residual: f64 },
    #[error("bump support does not fit on edge {edge} at the current mesh: {message}")]
    EdgeTooShort { edge: String, message: String },
    #[error("mountain-pass path collapsed onto endpoint {endpoint}")]
    PathCollapse { endpoint: usize },
    #[error("singular Jacobian (pivot {pivot:e})")]
    SingularJacobian { pivot: f64 },
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("continuation step fell below floor {floor:e} at parameter {parameter}")]
    StepFloorReached { floor: f64, parameter: f64 },
    #[error("no peak clears the lower bound {bound}")]
    NoPeaks { bound: f64 },
    #[error("rescaling window exceeds the graph (truncated to {reached} of {requested})")]
    WindowExceedsGraph { requested: f64, reached: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
