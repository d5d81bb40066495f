use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh divisions must be a positive multiple of 3, got {0}")]
    MeshAlignment(usize),
    #[error("degenerate triangle {0} (zero area)")]
    DegenerateElement(usize),
    #[error("input point invalid: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("node {0} lies on the Dirichlet boundary")]
    DirichletNode(usize),
    #[error("negative squared norm {0:e} exceeds round-off tolerance")]
    NegativeNorm(f64),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("unknown output id `{0}`")]
    UnknownOutput(String),
    #[error("not enough training data: {0}")]
    InsufficientData(String),
    #[error("feature {0} is constant; cannot fit scaling")]
    DegenerateFeature(usize),
    #[error("hyperparameter optimization failed: {0}")]
    Optimization(String),
    #[error("all basis functions pruned")]
    AllPruned,
    #[error("nonpositive errors under log transformation at rows {0:?}")]
    NonPositiveErrors(Vec<usize>),
    #[error("rigor level {0} outside (0, 1)")]
    RigorLevel(f64),
    #[error("inverted interval [{lower}, {upper}]")]
    InvertedInterval { lower: f64, upper: f64 },
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
