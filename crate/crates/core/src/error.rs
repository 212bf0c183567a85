use thiserror::Error;

/// Errors raised by the Fisher-information routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (residual {residual:.3e} exceeds {tolerance:.3e})")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("not PSD (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Kraus operators are not trace preserving (completeness residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("family evaluation failed at theta = {point:?}: {reason}")]
    Evaluation { point: Vec<f64>, reason: String },

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("negative probability {value:.3e} at outcome {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("witness is infeasible: Tr[(XX^+ + X^+X) rho] = {constraint:.6e} > 1")]
    InfeasibleWitness { constraint: f64 },

    #[error("invalid weight matrix: {0}")]
    InvalidWeight(String),

    #[error("inequality vacuous: {0}")]
    Vacuous(String),

    #[error("outside the parameter domain: {0}")]
    OutOfDomain(String),

    #[error("support condition violated (residual {residual:.3e})")]
    SupportViolation { residual: f64 },

    #[error("SDPA parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
