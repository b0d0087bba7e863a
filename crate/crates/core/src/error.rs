//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used by every fallible API in this crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv header does not match schema: {0}")]
    SchemaMismatch(String),

    #[error("dataset has no usable rows")]
    EmptyDataset,

    #[error("data row {row}, attribute '{attribute}': {reason}")]
    ParseValue {
        /// 1-based index into the data rows (header excluded).
        row: usize,
        attribute: String,
        reason: String,
    },

    #[error("split fraction must be strictly between 0 and 1, got {0}")]
    FractionOutOfRange(f64),

    #[error("model file is not in the expected format: {0}")]
    ModelFormat(String),

    #[error("tuning grid is empty")]
    EmptyGrid,

    #[error("target class '{class}' has {rows} rows, fewer than the {folds} cross-validation folds")]
    ClassTooSmall {
        class: String,
        rows: usize,
        folds: usize,
    },

    #[error("training split has no row with an outcome other than '{desired}'")]
    NoUnlikeRows { desired: String },

    #[error("no training row with outcome '{desired}' lies outside the current generalization")]
    NoCandidates { desired: String },

    #[error("cannot reach anonymity degree {k}: the merge hull of all candidates covers only {reached} rows")]
    Infeasible { k: usize, reached: usize },

    #[error("combination space has {size} value combinations, above the exact-enumeration cap of {cap}")]
    CombinationSpaceTooLarge { size: u128, cap: usize },

    #[error("partition of {size} rows cannot satisfy k = {k}")]
    PartitionTooSmall { size: usize, k: usize },
}
