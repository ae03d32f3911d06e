//! Experiment driver for the decoders: corpus loading or synthesis, decode
//! runs with JSON reports, run comparison and fixture generation.

mod compare;
mod config;
mod corpus;
mod fixtures;
mod run;

use std::path::PathBuf;

pub use compare::{compare_reports, compare_runs, CompareReport, Totals, UtteranceDelta, AVG_LL_TOLERANCE};
pub use config::{Corpus, ExperimentConfig, Mode};
pub use corpus::{load_corpus, load_inputs, Inputs, Utterance};
pub use fixtures::{make_fixture_suite, FixtureFile};
pub use run::{decode_corpus, run_experiment, run_sweep, Summary, SweepPoint, UtteranceReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Decode(#[from] asyncdec::decoder::DecodeError),
    #[error(transparent)]
    Synth(#[from] asyncdec::synth::SynthError),
    #[error(transparent)]
    Am(#[from] asyncdec::am::AmError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "io",
            HarnessError::Input { .. } => "input",
            HarnessError::Config(_) => "config",
            HarnessError::Decode(_) => "decode",
            HarnessError::Synth(_) => "synth",
            HarnessError::Am(_) => "acoustic",
            HarnessError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
