use thiserror::Error;

/// Errors raised by mesh construction, operator assembly and the solvers.
#[derive(Debug, Error)]
pub enum BdieError {
    #[error("coefficient violation: {0}")]
    Coefficient(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("unsupported quadrature: {0}")]
    Quadrature(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),
    #[error("truncation unsound: {0}")]
    TruncationUnsound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BdieError>;
