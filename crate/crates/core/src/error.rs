use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("boundary specification error: {0}")]
    Boundary(String),

    #[error("unsupported polynomial order {0} (expected 1 or 2)")]
    Order(usize),

    #[error("no quadrature rule of degree {0} is available")]
    Quadrature(usize),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("source jump line x = {0} is not aligned with the mesh")]
    SourceJump(f64),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    MaxIter { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),

    #[error("unknown example {0} (expected 1, 2 or 3)")]
    UnknownExample(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
