use std::path::PathBuf;

/// Errors produced by the softsense pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("no timestamp column: first header cell must be `timestamp`, found `{0}`")]
    NoTimestampColumn(String),
    #[error("duplicate sensor `{0}` in header")]
    DuplicateSensor(String),
    #[error("expected 7 distillation points, found {0} value columns")]
    WrongPointCount(usize),
    #[error("no data rows")]
    NoRows,
    #[error("bad timestamp `{value}` on line {line}")]
    BadTimestamp { line: usize, value: String },
    #[error("empty lab table")]
    EmptyLabTable,
    #[error("too few values: need at least {needed}, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("series too short: need at least {needed}, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("zero variance in column `{0}`")]
    ZeroVariance(String),
    #[error("too many features for exact enumeration: {0} > 15")]
    TooManyFeatures(usize),
    #[error("empty background sample")]
    EmptyBackground,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite training loss at epoch {epoch}: {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("optimizer did not converge after {iterations} iterations (best objective {best_objective})")]
    NotConverged {
        iterations: usize,
        best_objective: f64,
        best: Box<crate::sarima::SarimaFit>,
    },
    #[error("fitted model is not stationary or not invertible")]
    NotStationary,
    #[error("no candidate model could be fitted")]
    NoModel,
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }
}
