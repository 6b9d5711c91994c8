use thiserror::Error;

/// Errors raised by the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("timestamps not monotone at line {line}: {prev} then {curr}")]
    NonMonotone {
        line: usize,
        prev: String,
        curr: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined feature: {0}")]
    UndefinedFeature(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("undefined Sharpe ratio: zero standard deviation of day PL")]
    UndefinedSharpe,

    #[error("invalid query: {0}")]
    Query(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
