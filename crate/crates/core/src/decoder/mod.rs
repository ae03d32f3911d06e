//! Lattice-generating token-passing decoders.

mod async_search;
mod lattice;
mod options;
mod search;
mod token;

pub use async_search::decode_async;
pub use lattice::{best_path, BestPath, Lattice};
pub use options::{AsyncOptions, DecodeOptions};
pub use search::{decode, decode_biglm, decode_with};
pub use token::{ForwardLink, Frontier, Outcome, Status, Token, TokenId, TokenStore};

use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc as Shared;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fst::{Label, Wfst};
use crate::lm::{FState, LmError, ResidualGrammar};

/// Deterministic on-demand word machine composed with the decoding graph.
pub trait Grammar {
    type State: Copy + Eq + Hash + Ord + Debug;

    fn start(&self) -> Self::State;
    fn step(&self, state: Self::State, word: Label) -> Result<(Self::State, f64), DecodeError>;
    fn final_cost(&self, state: Self::State) -> f64;
}

/// The trivial grammar: one state, zero cost.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoGrammar;

impl Grammar for NoGrammar {
    type State = ();

    fn start(&self) {}

    fn step(&self, _: (), _: Label) -> Result<((), f64), DecodeError> {
        Ok(((), 0.0))
    }

    fn final_cost(&self, _: ()) -> f64 {
        0.0
    }
}

impl Grammar for ResidualGrammar {
    type State = FState;

    fn start(&self) -> FState {
        ResidualGrammar::start(self)
    }

    fn step(&self, state: FState, word: Label) -> Result<(FState, f64), DecodeError> {
        Ok(ResidualGrammar::step(self, state, word)?)
    }

    fn final_cost(&self, state: FState) -> f64 {
        ResidualGrammar::final_cost(self, state)
    }
}

/// A decoding graph built with the small LM, paired with the residual to the
/// large one.
#[derive(Clone, Debug)]
pub struct BigLmGraph {
    pub hclg: Shared<Wfst>,
    pub residual: Shared<ResidualGrammar>,
}

impl BigLmGraph {
    /// Checks that every graph output label is a word of the small LM.
    pub fn new(hclg: Shared<Wfst>, residual: Shared<ResidualGrammar>) -> Result<Self, DecodeError> {
        for w in hclg.output_labels() {
            if !residual.small().contains(w) && residual.small().unk().is_none() {
                return Err(DecodeError::Vocabulary(w));
            }
        }
        Ok(BigLmGraph { hclg, residual })
    }
}

/// Work and timing counters of one decode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeStats {
    /// Effective propagations: expansions that created or improved a token.
    /// For the two-front decoder this is the exploration front only.
    pub propagations: u64,
    pub propagations_backfill: u64,
    pub tokens_per_frame: Vec<usize>,
    pub num_frames: usize,
    pub wall_seconds: f64,
    pub rtf: f64,
    pub explore_seconds: f64,
    pub backfill_seconds: f64,
    /// Mean surviving tokens at each offset behind the frontier.
    pub survival: Vec<f64>,
}

impl DecodeStats {
    pub fn total_propagations(&self) -> u64 {
        self.propagations + self.propagations_backfill
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("no token reached a final state (frame {frame})")]
    Failed {
        frame: usize,
        stats: Box<DecodeStats>,
    },
    #[error(transparent)]
    Grammar(#[from] LmError),
    #[error("graph label {label} exceeds the {labels} acoustic columns")]
    Labels { label: Label, labels: usize },
    #[error("graph output label {0} is not in the small LM")]
    Vocabulary(Label),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("empty decoding graph")]
    EmptyGraph,
}
