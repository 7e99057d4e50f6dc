use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("input contains no rows")]
    EmptyInput,

    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("cell at row {row}, column {col} is not a finite number: {value:?}")]
    BadCell {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("label column {name:?} not found in header row")]
    LabelColumnMissing { name: String },

    #[error("a label column requires rows-are-instances orientation")]
    LabelColumnOrientation,

    #[error("duplicate feature name {name:?}")]
    DuplicateFeatureName { name: String },

    #[error("matrix has no features (d = 0)")]
    NoFeatures,

    #[error("need at least 2 instances, got {n}")]
    TooFewInstances { n: usize },

    #[error("{context} contains a non-finite value")]
    NonFinite { context: &'static str },

    #[error("{got} labels for {instances} instances")]
    LabelLengthMismatch { got: usize, instances: usize },

    #[error("feature names length {got} does not match feature count {d}")]
    FeatureNameCount { got: usize, d: usize },

    #[error("k = {k} out of range; must satisfy 1 <= k <= N-1 = {max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("alpha must be positive, got {alpha}")]
    AlphaNonPositive { alpha: f64 },

    #[error("step horizon n must be at least 1")]
    HorizonZero,

    #[error("expected {expected} transition powers, got {got}")]
    PowersLengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid solver configuration: {reason}")]
    InvalidSolverConfig { reason: String },

    #[error(
        "linear system is singular: leading minor of order {order} of X X^T + lambda Q is not \
         positive definite (X X^T is rank-deficient; use lambda > 0)"
    )]
    SingularSystem { order: usize },

    #[error("s = {s} out of range; must satisfy 1 <= s <= d = {d}")]
    SOutOfRange { s: usize, d: usize },

    #[error("selection results disagree: {reason}")]
    SelectionMismatch { reason: String },

    #[error("cluster count c = {c} out of range; must satisfy 1 <= c <= N = {n}")]
    ClusterCountOutOfRange { c: usize, n: usize },

    #[error("label vectors have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label vector is empty")]
    EmptyLabels,

    #[error("selected feature set is empty")]
    EmptySelection,

    #[error("feature index {index} out of range for d = {d}")]
    FeatureIndexOutOfRange { index: usize, d: usize },

    #[error("feature count {count} exceeds available features d = {d}")]
    CountExceedsFeatures { count: usize, d: usize },

    #[error("dataset has no labels; this operation requires ground-truth classes")]
    MissingLabels,

    #[error("repeats must be at least 1")]
    ZeroRepeats,
}

pub type Result<T> = std::result::Result<T, Error>;
