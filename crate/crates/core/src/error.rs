use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown sensor id `{missing}` (available: {})", available.join(", "))]
    UnknownSensor {
        missing: String,
        available: Vec<String>,
    },

    #[error("unknown subject `{0}`")]
    UnknownSubject(String),

    #[error("{file}:{line}: column `{column}`: {message}")]
    Schema {
        file: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{file}:{line}: timestamp {timestamp} does not increase for {subject}/{sensor_id}/{channel_id}")]
    TimestampRegression {
        file: PathBuf,
        line: u64,
        timestamp: f64,
        subject: String,
        sensor_id: String,
        channel_id: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sensor group `{sensor_id}` has {distinct} distinct rows, fewer than k = {k}")]
    TooFewDistinctRows {
        sensor_id: String,
        distinct: usize,
        k: usize,
    },

    #[error("training data contains a single class `{0}`")]
    SingleClass(String),

    #[error("sample weights must be nonnegative and not all zero")]
    InvalidWeights,

    #[error("normal equations are singular; use a positive ridge penalty")]
    Singular,

    #[error("both boosting stages abstain (alpha = 0)")]
    DegenerateEnsemble,

    #[error("no rows produced: {0}")]
    Empty(String),

    #[error("held-out subject `{subject}` reached fitting stage `{stage}`")]
    Leak { subject: String, stage: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("file holds a `{found}` model, expected `{expected}`")]
    ModelKind { found: String, expected: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
