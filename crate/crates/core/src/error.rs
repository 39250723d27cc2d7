use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("degenerate model: weight vector is zero")]
    DegenerateModel,
    #[error("empty training data")]
    EmptyData,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no threshold pair meets parity tolerance {tolerance} (smallest gap {best_gap})")]
    Infeasible { tolerance: f64, best_gap: f64 },
    #[error("round {round} exceeds horizon {horizon}")]
    RoundOverflow { round: usize, horizon: usize },
    #[error("empty trace set")]
    EmptyTrace,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
