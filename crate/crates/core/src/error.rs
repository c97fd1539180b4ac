use thiserror::Error;

use crate::femspace::Method;

/// Errors raised by mesh handling, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    VertexOutOfRange {
        triangle: usize,
        vertex: usize,
        n_vertices: usize,
    },

    #[error("triangle {triangle} has non-positive signed area {area:e}")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("mesh parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("refinement closure did not settle after {0} sweeps")]
    ClosureDiverged(usize),

    #[error("unsupported quadrature degree {0}, expected 1..=10")]
    UnsupportedDegree(usize),

    #[error("degree-of-freedom map was built for {found}, but {expected} was requested")]
    MethodMismatch { expected: Method, found: Method },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear solve failed ({context}): {reason}")]
    LinearSolve { context: String, reason: String },

    #[error("{method} Newton iteration on level {level} failed: {reason}")]
    Newton {
        method: Method,
        level: usize,
        reason: String,
    },

    #[error("at least {needed} records are required, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
