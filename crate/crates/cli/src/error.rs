use softcover::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Solver or verification invariant broken (exit 1).
    Invariant(String),
    /// I/O failure while writing results (exit 1).
    Io(String),
    /// Malformed or inconsistent configuration (exit 2).
    Config(String),
    /// Enumeration budget exceeded (exit 3).
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Budget(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { .. } | Error::OracleTooLarge { .. } => {
                CliError::Budget(e.to_string())
            }
            Error::Infeasible
            | Error::InvalidDistribution(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidOrder(_)
            | Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            Error::MonotonicityViolation { .. } => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
