use thiserror::Error;

use crate::nehari::SolutionRecord;

#[derive(Debug, Clone, Error)]
pub enum LabError {
    #[error("invalid exponents alpha={alpha}, beta={beta}: need 0 < alpha < beta < 1")]
    InvalidExponents { alpha: f64, beta: f64 },
    #[error("invalid dimension {0}: need dim >= 1")]
    InvalidDimension(usize),
    #[error("invalid radius {0}: need R > 0")]
    InvalidRadius(f64),
    #[error("dimension {dim} too low: operation requires dim >= {required}")]
    DimensionTooLow { dim: usize, required: usize },
    #[error("grid too coarse: {n_nodes} nodes, need at least {min}")]
    GridTooCoarse { n_nodes: usize, min: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite field value at node {0}")]
    NonFiniteValue(usize),
    #[error("field violates the Dirichlet condition: u(R) = {0}")]
    NonzeroBoundary(f64),
    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),
    #[error("degenerate field: T, A and B must all be positive (T={t}, A={a}, B={b})")]
    DegenerateField { t: f64, a: f64, b: f64 },
    #[error("infeasible: lambda={lambda} is below the fiber threshold {threshold}")]
    Infeasible { lambda: f64, threshold: f64 },
    #[error("not converged after {iterations} iterations (projected gradient {projected_gradient:e})")]
    NotConverged {
        iterations: usize,
        projected_gradient: f64,
        best: Option<Box<SolutionRecord>>,
    },
    #[error("not a solution: gradient residual {grad_residual:e} exceeds {threshold:e}")]
    NotASolution { grad_residual: f64, threshold: f64 },
    #[error("not a compacton: flux {flux:e} exceeds {threshold:e}")]
    NotCompacton { flux: f64, threshold: f64 },
    #[error("hypotheses unmet: {0}")]
    HypothesesUnmet(String),
    #[error("no sign change of P on [{lambda_lo}, {lambda_hi}] (P={p_lo:e} .. {p_hi:e})")]
    NoSignChange {
        lambda_lo: f64,
        lambda_hi: f64,
        p_lo: f64,
        p_hi: f64,
    },
    #[error("monotonicity lost at iteration {iteration}: max increase {max_violation:e} at node {node}")]
    MonotonicityLost {
        iteration: usize,
        max_violation: f64,
        node: usize,
    },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// Best-so-far record carried by a `NotConverged` error.
    pub fn best_record(&self) -> Option<&SolutionRecord> {
        match self {
            LabError::NotConverged { best, .. } => best.as_deref(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
