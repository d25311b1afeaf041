use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("empty domain for attribute {0}")]
    EmptyDomain(String),

    #[error("unknown attribute {0}")]
    UnknownAttribute(String),

    #[error("value {value:?} is not in the domain of {attribute}")]
    UnknownValue { attribute: String, value: String },

    #[error("attribute {attribute} has non-numeric label {value:?}")]
    NonNumeric { attribute: String, value: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("graph contains a cycle through {0}")]
    Cyclic(String),

    #[error("impossible evidence")]
    ImpossibleEvidence,

    #[error("state space of {0} joint configurations is too large to enumerate")]
    StateSpaceTooLarge(u128),

    #[error("model file error at line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: String, expected: u32 },

    #[error("no rule for attribute {0}")]
    NoRule(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("query budget of {limit} exhausted")]
    BudgetExhausted { limit: usize },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error came from bad input data rather than a programming
    /// or usage mistake. The CLI maps these to exit code 2.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::Config(_))
    }
}
