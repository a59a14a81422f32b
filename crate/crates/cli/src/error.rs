use std::path::{Path, PathBuf};

use serde_json::json;
use softsense_core::Error;

use crate::config::ConfigError;
use crate::stages::Stage;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing {what} ({})", path.display())]
    Missing { what: &'static str, path: PathBuf },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed {}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn corrupt(path: &Path, message: String) -> Self {
        CliError::Corrupt {
            path: path.to_path_buf(),
            message,
        }
    }

    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ CliError::InStage { .. } => e,
            e => CliError::InStage {
                stage,
                source: Box::new(e),
            },
        }
    }

    fn inner(&self) -> &CliError {
        match self {
            CliError::InStage { source, .. } => source.inner(),
            e => e,
        }
    }

    /// 2 for usage and missing inputs, 1 for everything that failed while
    /// computing.
    pub fn exit_code(&self) -> i32 {
        match self.inner() {
            CliError::Usage(_) | CliError::Config(_) | CliError::Missing { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.inner() {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Missing { .. } => "missing_input",
            CliError::Io { .. } => "io",
            CliError::Corrupt { .. } => "format",
            CliError::Core(e) => core_kind(e),
            CliError::InStage { .. } => unreachable!("inner never returns InStage"),
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self, stage: Option<Stage>) -> String {
        let stage = match self {
            CliError::InStage { stage, .. } => Some(*stage),
            _ => stage,
        };
        json!({
            "error": self.to_string(),
            "kind": self.kind(),
            "stage": stage.map(Stage::name),
        })
        .to_string()
    }
}

fn core_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::Csv { .. }
        | Error::NoTimestampColumn(_)
        | Error::DuplicateSensor(_)
        | Error::WrongPointCount(_)
        | Error::NoRows
        | Error::BadTimestamp { .. }
        | Error::Format { .. } => "format",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::NonFiniteLoss { .. } => "non_finite_loss",
        Error::NotConverged { .. } | Error::NotStationary | Error::NoModel => "model_fit",
        _ => "computation",
    }
}
