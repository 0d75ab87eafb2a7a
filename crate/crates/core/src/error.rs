use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("duplicate system id `{0}`")]
    DuplicateSystemId(String),

    #[error("non-numeric cell `{value}` in column `{column}` at data row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("negative uncertainty {value} in column `{column}` at data row {row}")]
    NegativeUncertainty {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("too few systems: {found} (need at least {required})")]
    TooFewSystems { found: usize, required: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("degenerate uncertainty: {0}")]
    DegenerateUncertainty(String),

    #[error("invalid bootstrap plan: {0}")]
    InvalidPlan(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
