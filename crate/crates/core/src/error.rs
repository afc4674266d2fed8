use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has no rows or no columns")]
    EmptyMatrix,
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("label vector has length {labels}, data has {rows} rows")]
    LabelLengthMismatch { labels: usize, rows: usize },

    #[error("latent dimension {latent_dim} is not in 1..={max}")]
    LatentDimTooLarge { latent_dim: usize, max: usize },
    #[error("fit needs at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("training diverged: non-finite loss at step {step}")]
    FitDiverged { step: usize },
    #[error("shape mismatch: expected {expected} columns, got {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("scale entry {index} is not strictly positive")]
    NonPositiveScale { index: usize },
    #[error("centered vector is identically zero")]
    ZeroVarianceVector,
    #[error("quadratic form is negative ({0:e}); inverse covariance is not PSD")]
    NegativeQuadraticForm(f64),
    #[error("metric {0} needs context that was not supplied")]
    MissingContext(&'static str),

    #[error("scoring needs at least one inlier and one outlier")]
    DegenerateLabels,
    #[error("requested {requested} seen outliers but only {available} are labeled")]
    NotEnoughOutliers { requested: usize, available: usize },
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("every candidate configuration failed")]
    NoValidCandidate,

    #[error("k = {k} must satisfy 1 <= k < n_d = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("{path}: parse error on line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: non-numeric value {value:?} in feature column {column:?} (line {line})")]
    NonNumericFeature {
        path: PathBuf,
        column: String,
        line: usize,
        value: String,
    },
    #[error("{path}: label {value:?} on line {line} is not 0 or 1")]
    BadLabelValue {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("invalid value: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::KTooLarge { .. }
            | Error::NotEnoughOutliers { .. } => 1,
            Error::FitDiverged { .. }
            | Error::ZeroVarianceVector
            | Error::NegativeQuadraticForm(_)
            | Error::NoValidCandidate => 3,
            _ => 2,
        }
    }
}
