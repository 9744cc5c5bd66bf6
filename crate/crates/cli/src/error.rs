use std::io;
use std::path::PathBuf;

use exitcal_core::dataset::DatasetError;
use exitcal_core::exit_engine::EngineError;
use exitcal_core::metrics::MetricsError;
use exitcal_core::overlay::OverlayError;
use exitcal_core::search::SearchError;
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{0} invalid record(s)")]
    InvalidRecords(usize),
    #[error("pass-1 results not found at {0}")]
    MissingPass1(PathBuf),
    #[error("no results found in {0}")]
    MissingResults(PathBuf),
    #[error("{path}: {message}")]
    BadResults { path: PathBuf, message: String },
    #[error("dataset digest {actual} does not match the pass-1 run ({expected})")]
    DigestMismatch { expected: String, actual: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 for data and validation failures, 2 for usage and IO problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Dataset(DatasetError::Io { .. }) => 2,
            CliError::MissingPass1(_) | CliError::MissingResults(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
