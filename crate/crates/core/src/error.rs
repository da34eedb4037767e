use thiserror::Error;

/// Errors raised by grid construction, solvers and the check harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain mismatch between operands")]
    DomainMismatch,

    #[error("cell index {index} out of range for {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid values: {0}")]
    InvalidValues(String),

    #[error("weight must be strictly positive (cell {cell} has {value})")]
    NonPositiveWeight { cell: usize, value: f64 },

    #[error("signed density has nonzero total mass {mass:e} (total variation {total_variation:e})")]
    NonZeroMass { mass: f64, total_variation: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("total masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("operation requires {expected}")]
    WrongDomainType { expected: &'static str },

    #[error("transport problem too large: {rows} x {cols} support cells exceeds cap {cap}")]
    ProblemTooLarge { rows: usize, cols: usize, cap: usize },

    #[error("domination violated at cell {cell}: {lhs} < {rhs}")]
    DominationViolated { cell: usize, lhs: f64, rhs: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("test field has zero seminorm")]
    ConstantField,

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("network simplex failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
