use std::sync::Arc as Shared;

use crate::fst::{Label, EPSILON};

use super::{BackoffLm, LmError, LmState, Result};

/// Joint state of the small and large models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FState {
    pub small: LmState,
    pub large: LmState,
}

/// Deterministic on-demand machine scoring `cost_large(w|h') - cost_small(w|h)`.
///
/// Words are given as ids of the small model, which are the output labels of
/// a graph built from it; they are mapped to the large model's ids by spelling.
#[derive(Clone, Debug)]
pub struct ResidualGrammar {
    small: Shared<BackoffLm>,
    large: Shared<BackoffLm>,
    to_large: Vec<Option<Label>>,
}

impl ResidualGrammar {
    /// Pairs two models. Every word of the small model must be known to the
    /// large one, either directly or through its `<unk>`.
    pub fn new(small: Shared<BackoffLm>, large: Shared<BackoffLm>) -> Result<Self> {
        let mut to_large = vec![None; small.symbols().len().max(1) + 1];
        for (id, sym) in small.symbols().iter() {
            if id == EPSILON || !small.contains(id) {
                continue;
            }
            let mapped = large
                .symbols()
                .id(sym)
                .filter(|&w| large.contains(w))
                .or(large.unk())
                .ok_or_else(|| {
                    LmError::Vocabulary(format!("{sym:?} is unknown to the large model"))
                })?;
            if id as usize >= to_large.len() {
                to_large.resize(id as usize + 1, None);
            }
            to_large[id as usize] = Some(mapped);
        }
        Ok(ResidualGrammar {
            small,
            large,
            to_large,
        })
    }

    pub fn small(&self) -> &BackoffLm {
        &self.small
    }

    pub fn large(&self) -> &BackoffLm {
        &self.large
    }

    pub fn start(&self) -> FState {
        FState {
            small: self.small.start(),
            large: self.large.start(),
        }
    }

    /// Advances both models on `word` (a small-model id).
    pub fn step(&self, state: FState, word: Label) -> Result<(FState, f64)> {
        let (small, c_small) = self.small.step(state.small, word)?;
        let mapped = self
            .to_large
            .get(word as usize)
            .copied()
            .flatten()
            .or(self.large.unk())
            .ok_or(LmError::Oov(word))?;
        let (large, c_large) = self.large.step(state.large, mapped)?;
        Ok((FState { small, large }, c_large - c_small))
    }

    pub fn final_cost(&self, state: FState) -> f64 {
        self.large.final_cost(state.large) - self.small.final_cost(state.small)
    }

    /// Residual cost of a whole sentence.
    pub fn sentence_cost(&self, words: &[Label]) -> Result<f64> {
        let mut state = self.start();
        let mut total = 0.0;
        for &w in words {
            let (next, c) = self.step(state, w)?;
            total += c;
            state = next;
        }
        Ok(total + self.final_cost(state))
    }
}
