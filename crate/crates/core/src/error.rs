use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-uniform time step at row {row}: expected {expected_s} s, found {found_s} s")]
    NonUniformStep {
        row: usize,
        expected_s: i64,
        found_s: i64,
    },

    #[error("non-finite value in column `{column}` at row {row}")]
    NonFiniteValue { row: usize, column: String },

    #[error("cannot parse `{value}` in column `{column}` at row {row}")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series too short: need at least {needed} points, got {found}")]
    TooShort { needed: usize, found: usize },

    #[error("mode selection is empty")]
    EmptySelection,

    #[error("pole-rate baseline count is zero")]
    ZeroBaseline,

    #[error("every mode exceeds the pole-rate threshold (rates: {rates:?})")]
    AllModesRejected { rates: Vec<f64> },

    #[error("empty input sequence")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("historical series too short: need {needed} points, got {found}")]
    HistoricalTooShort { needed: usize, found: usize },

    #[error("invalid number of selected queries s={s} for L_Q={l_q}")]
    InvalidS { s: usize, l_q: usize },

    #[error("alignment error: {0}")]
    AlignmentError(String),

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("not enough training rows: {rows} rows for {features} features")]
    InsufficientRows { rows: usize, features: usize },

    #[error("empty input")]
    Empty,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
