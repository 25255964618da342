//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- series ------------------------------------------------------------
    #[error("non-positive value at index {0}; log transform needs strictly positive data")]
    NonPositiveValue(usize),
    #[error("degenerate range: min == max ({0}), cannot scale to [0,1]")]
    DegenerateRange(f64),
    #[error("no present values in bucket (month {month}, period {period})")]
    EmptyBucket { month: u32, period: u8 },
    #[error("series ranges do not overlap")]
    NoOverlap,
    #[error("invalid time point: {0}")]
    InvalidTimePoint(String),

    // -- ingest ------------------------------------------------------------
    #[error("{path}:{line}: parse error: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("schema error: missing or unexpected column `{0}`")]
    Schema(String),
    #[error("{path}:{line}: timestamps are not strictly increasing")]
    NonMonotonicTime { path: String, line: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    // -- features ----------------------------------------------------------
    #[error("lag {lag} is not smaller than the series length {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has zero variance over the fit rows")]
    ZeroVariance(String),

    // -- numerics ----------------------------------------------------------
    #[error("design matrix is rank deficient (column `{0}`)")]
    RankDeficient(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("column mismatch: expected {expected:?}, got {actual:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        actual: Vec<String>,
    },
    #[error("invalid number of components k = {k} for {columns} columns")]
    BadK { k: usize, columns: usize },

    // -- neural ------------------------------------------------------------
    #[error("series of {rows} rows is too short for a {timesteps}-step window")]
    TooShort { rows: usize, timesteps: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least 2 windows to train, got {0}")]
    TooFewWindows(usize),

    // -- ensembles ---------------------------------------------------------
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),

    // -- evaluation --------------------------------------------------------
    #[error("actual value is zero at index {0}; MAPE undefined")]
    ZeroActual(usize),
    #[error("leakage: {0}")]
    Leakage(String),
    #[error("missing data: {0}")]
    MissingData(String),

    // -- pipeline ----------------------------------------------------------
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("artifact version/checksum mismatch: {0}")]
    ArtifactVersionMismatch(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap with a short description of the step that failed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub trait ResultExt<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.context(context))
    }
}
