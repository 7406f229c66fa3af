use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected} components, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("level index {index} out of range for option `{option}` ({levels} levels)")]
    LevelOutOfRange {
        option: String,
        index: usize,
        levels: usize,
    },

    #[error("budget fraction {0} outside (0, 1]")]
    FractionOutOfRange(f64),

    #[error("requested {requested} configurations but only {available} are available")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("unknown option column `{0}`")]
    UnknownOption(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("off-domain value {value} for option `{option}` at line {line}")]
    OffDomainValue { option: String, value: f64, line: u64 },

    #[error("non-positive metric value {value} at line {line}")]
    NonPositiveMetric { value: f64, line: u64 },

    #[error("duplicate record (config {config}, metric {metric}, replicate {replicate})")]
    DuplicateRecord {
        config: String,
        metric: String,
        replicate: u32,
    },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("records from several environments in one dataset: {0} and {1}")]
    MixedEnvironments(String, String),

    #[error("unmeasured configuration {0}")]
    UnmeasuredConfiguration(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid test count {test_count} for {distinct} distinct configurations")]
    InvalidTestCount { test_count: usize, distinct: usize },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("positivity violated: generated value {0}")]
    PositivityViolated(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergence: non-finite training loss at epoch {epoch}; try a smaller step size")]
    Divergence { epoch: usize },

    #[error("near-zero truth value {0}")]
    NearZeroTruth(f64),

    #[error("missing report cell: {0}")]
    MissingCell(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("unsupported model format `{0}`")]
    UnsupportedFormat(String),

    /// The message already carries the OS error, so it is not exposed as a source.
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }
}
