use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("slate size must be positive")]
    NonPositiveSlateSize,

    #[error("slate weight at slot {slot} is negative or not finite: {value}")]
    InvalidAlpha { slot: usize, value: f64 },

    #[error("length mismatch in {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("context dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("logged propensity {value} at record {record}, slot {slot} must lie in (0, 1]")]
    InvalidPropensity {
        record: usize,
        slot: usize,
        value: f64,
    },

    #[error("dataset must contain at least one record")]
    EmptyDataset,

    #[error(
        "full support violated: behavior probability is zero for record {record} at slot {slot}"
    )]
    ZeroPropensity { record: usize, slot: usize },

    #[error("record {record} has no logged propensities and no behavior policy was supplied")]
    MissingPropensity { record: usize },

    #[error("policy similarity must lie in [-1, 1), got {0}")]
    LambdaOutOfRange(f64),

    #[error("prefix of length {prefix} is too long for slate size {slate_size}")]
    PrefixTooLong { prefix: usize, slate_size: usize },

    #[error("slot {slot} out of range for slate size {slate_size}")]
    SlotOutOfRange { slot: usize, slate_size: usize },

    #[error("enumeration of {size} outcomes exceeds the limit of {limit}")]
    EnumerationTooLarge { size: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("slot {0} of the baseline model has not been trained")]
    UntrainedSlot(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the filesystem rather than of the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
