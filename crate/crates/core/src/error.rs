use thiserror::Error;

use crate::data::YearMonth;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing value at row {row}, column {col}")]
    MissingData { row: usize, col: usize },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("numeric domain error at index {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iterate became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("singular KKT system (condition number estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("problem too large for exhaustive enumeration: n = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: missing value sentinel in column '{asset}'")]
    MissingSentinel { line: u64, asset: String },

    #[error("line {line}: month gap between {prev} and {next}")]
    MonthGap {
        line: u64,
        prev: YearMonth,
        next: YearMonth,
    },

    #[error("window {start}..={end} is outside the panel range {first}..={last}")]
    WindowOutOfRange {
        start: YearMonth,
        end: YearMonth,
        first: YearMonth,
        last: YearMonth,
    },

    #[error("empty window")]
    EmptyWindow,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
