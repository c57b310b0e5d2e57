use thiserror::Error;

/// Errors shared across the crate. Parse errors carry 1-based line/column
/// positions into the network text that produced them.
#[derive(Debug, Clone, Error)]
pub enum CrnError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid network: {msg}")]
    InvalidNetwork { msg: String },

    #[error("state must be strictly positive: component {index} is {value}")]
    NonPositiveState { index: usize, value: f64 },

    #[error("rate assignment does not match the network edge set: {msg}")]
    RateMismatch { msg: String },

    #[error("rate must be strictly positive: edge {edge} has rate {value}")]
    NonPositiveRate { edge: usize, value: f64 },

    #[error("rate schedule for edge {edge} returned {value} at t = {t}, outside [{lo}, {hi}]")]
    ScheduleOutOfBounds { edge: usize, t: f64, value: f64, lo: f64, hi: f64 },

    #[error("network is not weakly reversible: {msg}")]
    NotWeaklyReversible { msg: String },

    #[error("rates are not complex-balanced: toric residual {residual} exceeds {tol}")]
    NotComplexBalanced { residual: f64, tol: f64 },

    #[error("steady-state solve did not converge after {iterations} iterations (residual {residual})")]
    SolveDidNotConverge { iterations: usize, residual: f64 },

    #[error("state is not a steady state: rhs norm {norm} exceeds {tol}")]
    NotSteadyState { norm: f64, tol: f64 },

    #[error("dimension mismatch: {msg}")]
    ShapeMismatch { msg: String },

    #[error("species universes differ: {msg}")]
    SpeciesMismatch { msg: String },

    #[error("invalid plan: {msg}")]
    InvalidPlan { msg: String },

    #[error("network does not have the required form: {msg}")]
    UnsupportedShape { msg: String },

    #[error("integration failed: {msg}")]
    IntegrationFailure { msg: String },

    #[error("internal invariant violated: {msg}")]
    Internal { msg: String },
}
