use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant onto an exit code
/// via [`Error::is_budget`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}: missing target value")]
    MissingTarget { row: usize },

    #[error("column `{0}` named in schema is not present in the CSV header")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    InvalidValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("support index {index} out of range for {dim} binary features")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("normal equations are singular on support {0:?}")]
    SingularSupport(Vec<usize>),

    #[error("k = {k} exceeds the number of binary features D = {dim}")]
    KTooLarge { k: usize, dim: usize },

    #[error("mdlp discretization requires a label source")]
    MissingLabelSource,

    #[error("enumeration of {needed} supports exceeds the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
}

impl Error {
    /// True for solver/enumeration budget exhaustion.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
