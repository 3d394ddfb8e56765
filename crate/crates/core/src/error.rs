use thiserror::Error;

/// Errors raised by the library. CLI exit codes are derived from the variant.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empirical distribution is empty")]
    EmptyDistribution,

    #[error("no sample lies strictly beyond the VaR level")]
    EmptyTail,

    #[error("endowment schedule has zero quadratic mass")]
    DegenerateSchedule,

    #[error("Euler scheme needs at least 100 steps per period, got {0}")]
    StepTooCoarse(usize),

    #[error("risk constraint cannot be met: {0}")]
    InfeasibleRisk(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code: 2 input, 3 infeasible optimization, 4 degenerate data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleRisk(_) => 3,
            Error::DegenerateData(_) => 4,
            _ => 2,
        }
    }
}
