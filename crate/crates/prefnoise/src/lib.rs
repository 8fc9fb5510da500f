//! Experiment harness, file formats, CLI plumbing and the remote-teacher
//! client for the preference-noise laboratory.
//!
//! The algorithmic core lives in `prefnoise-core`; this crate adds
//! everything that touches the outside world: JSON experiment configs, the
//! feedback/training loop with CSV emission, sweep orchestration, report
//! generation, parameter files, and an OpenAI-compatible chat client used to
//! elicit preferences from a remote model.

pub mod config;
pub mod harness;
pub mod params;
pub mod records;
pub mod remote;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the harness and its file formats.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] prefnoise_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv row {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Remote(#[from] remote::RemoteError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
