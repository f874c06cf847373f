use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("label {label} of item `{item}` is out of range for {n_classes} classes")]
    LabelOutOfRange {
        item: String,
        label: usize,
        n_classes: usize,
    },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("feature matrix format error: {0}")]
    FormatError(String),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("smoothing spline needs at least 3 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be strictly increasing (violated at index {0})")]
    BadKnots(usize),
    #[error("smoothing parameter must lie in (0, 1], got {0}")]
    BadSmoothing(f64),
    #[error("bad spline weights: {0}")]
    BadWeights(String),
    #[error("no timestamps available to fit a temporal model")]
    NoTimestamps,
    #[error("no temporal model for class {0}")]
    MissingModel(usize),
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("temporal score {0} outside [0, 1]")]
    BadScore(f64),
    #[error("labels must contain both signs")]
    DegenerateLabels,
    #[error("sigmoid calibration did not converge in {0} iterations")]
    CalibrationFailure(usize),
    #[error("inconsistent pairwise probabilities for classes {a} and {b}")]
    BadPairwise { a: usize, b: usize },
    #[error("class {class} has {count} examples, at least {required} needed")]
    TooFewExamples {
        class: usize,
        count: usize,
        required: usize,
    },
    #[error("feature sources are not aligned: {0}")]
    AlignmentError(String),
    #[error("class {0} has no positive items")]
    NoPositives(usize),
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
