use std::path::PathBuf;

use asyncdec::decoder::{AsyncOptions, DecodeOptions};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Static graph only.
    Decode,
    /// Graph composed on the fly with the large-LM residual.
    DecodeBiglm,
    /// Two-front asynchronous variant of `decode-biglm`.
    DecodeAsync,
    /// Static decode, then lattice rescoring with the residual.
    Rescore,
}

impl Mode {
    pub fn needs_lms(self) -> bool {
        self != Mode::Decode
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Decode => "decode",
            Mode::DecodeBiglm => "decode-biglm",
            Mode::DecodeAsync => "decode-async",
            Mode::Rescore => "rescore",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corpus {
    /// A log-likelihood CSV, or a directory of them. `<stem>.txt` next to a
    /// matrix holds its reference words.
    Files(PathBuf),
    /// Utterances sampled from the graph itself; seeds `seed..seed + count`.
    Synth { count: usize, seed: u64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub hclg: PathBuf,
    /// Word table for the graph's output labels. Defaults to the small LM's
    /// unigram order, which is what graphs built from that LM use.
    pub words: Option<PathBuf>,
    pub lm_small: Option<PathBuf>,
    pub lm_large: Option<PathBuf>,
    pub corpus: Corpus,
    pub decode: DecodeOptions,
    pub offset: usize,
    pub front_batch: usize,
    /// `None` means the lattice beam.
    pub backfill_beam: Option<f64>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, hclg: PathBuf, corpus: Corpus, out: PathBuf) -> Self {
        let defaults = AsyncOptions::default();
        ExperimentConfig {
            mode,
            hclg,
            words: None,
            lm_small: None,
            lm_large: None,
            corpus,
            decode: DecodeOptions::default(),
            offset: defaults.offset,
            front_batch: defaults.front_batch,
            backfill_beam: None,
            out,
        }
    }

    pub fn async_options(&self) -> AsyncOptions {
        AsyncOptions {
            decode: self.decode,
            offset: self.offset,
            front_batch: self.front_batch,
            backfill_beam: self.backfill_beam.unwrap_or(self.decode.lattice_beam),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.needs_lms() && (self.lm_small.is_none() || self.lm_large.is_none()) {
            return Err(HarnessError::Config(format!(
                "mode {} needs --lm-small and --lm-large",
                self.mode.name()
            )));
        }
        if let Corpus::Synth { count, sigma, .. } = self.corpus {
            if count == 0 {
                return Err(HarnessError::Config("synthetic corpus needs at least one utterance".into()));
            }
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(HarnessError::Config(format!("noise sigma {sigma} must be finite and non-negative")));
            }
        }
        self.async_options().validate()?;
        Ok(())
    }
}
