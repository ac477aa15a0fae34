use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("label at row {row} is {value}; labels must be 0 or 1")]
    InvalidLabel { row: usize, value: String },

    #[error("proportion {0} is outside [0, 1]")]
    InvalidProportion(f64),

    #[error("empirical distribution has no observations")]
    EmptyDistribution,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("biomarker {biomarker} has {count} non-missing values in class {class}; at least 2 are required")]
    TooFewValues {
        biomarker: usize,
        class: u8,
        count: usize,
    },

    #[error("missing value at row {row}, column {column}; this method requires complete data")]
    MissingValue { row: usize, column: usize },

    #[error("both classes must be present")]
    SingleClass,

    #[error("cannot build {folds} folds: {reason}")]
    Folds { folds: usize, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown design id {0}")]
    UnknownDesign(String),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("unknown method {0}")]
    UnknownMethod(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),
}

pub type Result<T> = core::result::Result<T, Error>;
