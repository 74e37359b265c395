//! Error type shared by all modules, with a coarse category used for
//! process exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SubpopError>;

#[derive(Debug, Error)]
pub enum SubpopError {
    #[error("parse error at row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error("no valid events in input")]
    EmptyLog,

    #[error("degenerate temporal split: {0}")]
    DegenerateSplit(String),

    #[error("SVD did not converge within {max_iter} iterations")]
    ConvergenceFailure { max_iter: usize },

    #[error("requested rank {rank} exceeds limit {max} for this matrix")]
    RankTooLarge { rank: usize, max: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("external logits missing evaluated user {0}")]
    MissingUser(String),

    #[error("non-finite score at row {row}")]
    NonFiniteScore { row: usize },

    #[error("fusion weights violate alpha + beta <= 1 with alpha, beta in [0,1]: alpha={alpha}, beta={beta}")]
    WeightViolation { alpha: f64, beta: f64 },

    #[error("duplicate item {item} in recommendation list")]
    DuplicateInRecs { item: usize },

    #[error("user has an empty training history")]
    EmptyHistory,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error categories, one per process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad flags, config files, or argument combinations (exit 2).
    Usage,
    /// Malformed input data (exit 3).
    Parse,
    /// Structurally unusable data: empty logs, degenerate splits,
    /// missing users (exit 4).
    Data,
    /// Numerical failures (exit 5).
    Numeric,
    /// Filesystem problems (exit 6).
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Parse => 3,
            ErrorCategory::Data => 4,
            ErrorCategory::Numeric => 5,
            ErrorCategory::Io => 6,
        }
    }
}

impl SubpopError {
    pub fn category(&self) -> ErrorCategory {
        use SubpopError::*;
        match self {
            Parse { .. } | NonFiniteScore { .. } => ErrorCategory::Parse,
            EmptyLog
            | DegenerateSplit(_)
            | MissingUser(_)
            | EmptyHistory
            | DuplicateInRecs { .. } => ErrorCategory::Data,
            ConvergenceFailure { .. } | RankTooLarge { .. } => ErrorCategory::Numeric,
            IndexOutOfRange { .. }
            | DimensionMismatch(_)
            | WeightViolation { .. }
            | Config(_)
            | InvalidArgument(_) => ErrorCategory::Usage,
            Io(_) => ErrorCategory::Io,
        }
    }
}
