use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("loss matrix needs at least one round")]
    NoRounds,

    #[error("need at least two experts, got {0}")]
    TooFewExperts(usize),

    #[error("round {round}: expected {expected} entries, found {found}")]
    RowWidth {
        round: usize,
        expected: usize,
        found: usize,
    },

    #[error("round {round}, expert {expert}: loss {value} outside [0, 1]")]
    LossOutOfRange {
        round: usize,
        expert: usize,
        value: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a simplex point: {0}")]
    NotSimplex(String),

    #[error("round {round}: policy emitted an invalid action ({reason})")]
    InvalidAction { round: usize, reason: String },

    #[error("round {round} is past the horizon {horizon}")]
    HorizonExceeded { round: usize, horizon: usize },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
