//! ARPA backoff language models and the on-demand residual grammar.

mod arpa;
mod residual;
mod to_wfst;

pub use arpa::{BackoffLm, LmState, BOS, EOS, UNK};
pub use residual::{FState, ResidualGrammar};
pub use to_wfst::lm_to_wfst;

use thiserror::Error;

use crate::fst::Label;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing ARPA section {0}")]
    MissingSection(String),
    #[error("{order}-gram count mismatch: header says {declared}, found {found}")]
    CountMismatch {
        order: usize,
        declared: usize,
        found: usize,
    },
    #[error("n-gram without its history: {0}")]
    MissingHistory(String),
    #[error("duplicate n-gram: {0}")]
    Duplicate(String),
    #[error("word id {0} is out of vocabulary and the model has no <unk>")]
    Oov(Label),
    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),
    #[error("model has no unigrams")]
    Empty,
}

pub type Result<T> = std::result::Result<T, LmError>;
