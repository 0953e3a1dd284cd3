use thiserror::Error;

/// Errors reported by solvers, projections and problem constructors.
///
/// Non-convergence of the *outer* fixed-point loop is not an error variant:
/// the outer iteration has no convergence guarantee, so `solve_qvhi` reports
/// it in-band through `converged = false`. Variants here are for genuinely
/// bad data or for inner machinery that is contractually expected to succeed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gram matrix of space `{label}` is not symmetric positive definite")]
    NotSpd { label: String },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("power iteration did not reach relative tolerance {tol:e} after {iterations} iterations (last eigenvalue estimate {last})")]
    PowerIterationStalled {
        iterations: usize,
        tol: f64,
        last: f64,
    },

    #[error("projection did not converge after {iterations} iterations (final residual {residual:e})")]
    ProjectionStalled { iterations: usize, residual: f64 },

    #[error("composite prox did not converge after {iterations} iterations (final residual {residual:e})")]
    ProxStalled { iterations: usize, residual: f64 },

    #[error("inner VI solve did not converge after {iterations} iterations (final residual {residual:e})")]
    InnerSolveFailed { iterations: usize, residual: f64 },

    #[error("invalid step size {tau}: contraction requires 0 < tau < {limit}")]
    InvalidStep { tau: f64, limit: f64 },

    #[error("smallness condition (H0) violated: m = {m} must exceed beta*|M|^2 = {bound} (margin {margin})")]
    SmallnessViolated { m: f64, bound: f64, margin: f64 },

    #[error("convex potential has no affine minorant; a-priori bounds need (l, b) with phi(z) >= <l, z> + b")]
    MissingMinorant,

    #[error("anchor point is infeasible: {context}")]
    InfeasibleAnchor { context: String },

    #[error("constraint level is degenerate: m(v) = {level} is below r(0) = {r_zero}")]
    DegenerateConstraint { level: f64, r_zero: f64 },

    #[error("empty box: lower bound exceeds upper bound at component {index}")]
    EmptyBox { index: usize },

    #[error("hypothesis {clause} violated: {witness}")]
    HypothesisViolated { clause: String, witness: String },

    #[error("boundary part {part} is empty")]
    EmptyBoundaryPart { part: String },

    #[error("operation supports dimension <= {max}, got {dim}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
