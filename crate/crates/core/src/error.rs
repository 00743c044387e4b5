use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric: defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { defect: f64, tolerance: f64 },

    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal {off_diagonal:.3e})")]
    EigenNoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("numeric failure at series term {term}: |a_prev| = {prev_norm:.6e} (diverging or V too small)")]
    NumericFailure { term: usize, prev_norm: f64 },

    #[error("problem size {got} exceeds the dense-oracle capacity of {limit} parameters")]
    Capacity { limit: usize, got: usize },

    #[error("gradient has vanished; scaling-factor bound is undefined")]
    GradientVanished,

    #[error("degenerate difference: consecutive iterates coincide, sequence treated as converged")]
    DegenerateDifference,

    #[error("matrix is singular or nearly singular (min |eigenvalue| {min_abs:.3e} vs max {max_abs:.3e})")]
    SingularMatrix { min_abs: f64, max_abs: f64 },

    #[error("local quadratic model predicts no change; reduction ratio is undefined")]
    DegenerateModel,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
