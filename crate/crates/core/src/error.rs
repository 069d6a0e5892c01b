use thiserror::Error;

/// Errors raised by the exponent toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Rényi order must be positive, got {0}")]
    InvalidOrder(f64),

    #[error("P_Y not reachable under W: no input distribution maps to the target output")]
    Infeasible,

    #[error("budget exceeded: {what} needs {needed} objects but the cap is {cap}; reduce n")]
    BudgetExceeded {
        what: &'static str,
        needed: f64,
        cap: f64,
    },

    #[error("alphabet too large for oracle mode: {cells} joint cells (limit {limit})")]
    OracleTooLarge { cells: usize, limit: usize },

    #[error("monotonicity violation in {which} by {amount:e} (solver noise limit {limit:e})")]
    MonotonicityViolation {
        which: &'static str,
        amount: f64,
        limit: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
