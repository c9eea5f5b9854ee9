use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::TrainHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("catalog: {0}")]
    Catalog(String),

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Training hit a non-finite loss. The history holds every epoch that completed.
    #[error("non-finite loss during {phase} epoch {epoch}")]
    NonFiniteLoss {
        phase: String,
        epoch: usize,
        history: TrainHistory,
    },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Catalog(_) | Error::Config(_) => 2,
            Error::Numeric(_) | Error::NonFiniteLoss { .. } => 4,
            Error::Data(_)
            | Error::Dimension(_)
            | Error::ModelFile(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 3,
        }
    }
}
