use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("record {id} has no simulated strain")]
    MissingStrain { id: u64 },

    #[error("strain already recorded for candidate {id}")]
    StrainAlreadySet { id: u64 },

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("priority for candidate {id} is NaN")]
    NanPriority { id: u64 },

    #[error("acquisition mode {0} needs a surrogate prediction")]
    MissingPrediction(&'static str),

    #[error("fine-tuning needs at least {need} elite records, got {got}")]
    InsufficientElite { need: usize, got: usize },

    #[error("reference set is empty")]
    EmptyReference,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("world calibration failed: {0}")]
    Calibration(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("worker failure: {0}")]
    Worker(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
