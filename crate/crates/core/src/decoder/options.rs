use serde::{Deserialize, Serialize};

use super::DecodeError;

/// Pruning and scoring knobs shared by all decoders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub beam: f64,
    pub max_active: usize,
    pub lattice_beam: f64,
    pub acoustic_scale: f64,
    pub prune_interval: usize,
    /// Record token survival for offsets `0..=survival_window` (0 disables).
    pub survival_window: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam: 15.0,
            max_active: 7000,
            lattice_beam: 8.0,
            acoustic_scale: 1.0,
            prune_interval: 25,
            survival_window: 0,
        }
    }
}

impl DecodeOptions {
    /// Every pruning mechanism disabled.
    pub fn exhaustive() -> Self {
        DecodeOptions {
            beam: f64::INFINITY,
            max_active: usize::MAX,
            lattice_beam: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |msg: &str| Err(DecodeError::Options(msg.to_string()));
        if !(self.beam > 0.0) {
            return bad("beam must be positive");
        }
        if !(self.lattice_beam > 0.0) {
            return bad("lattice beam must be positive");
        }
        if self.max_active == 0 {
            return bad("max-active must be at least 1");
        }
        if !(self.acoustic_scale >= 0.0 && self.acoustic_scale.is_finite()) {
            return bad("acoustic scale must be finite and non-negative");
        }
        if self.prune_interval == 0 {
            return bad("prune interval must be at least 1");
        }
        Ok(())
    }
}

/// Options of the two-front decoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsyncOptions {
    pub decode: DecodeOptions,
    /// Frames between the exploration and backfill fronts.
    pub offset: usize,
    /// Frames processed per front turn.
    pub front_batch: usize,
    /// A* gate slack for backfilling deferred tokens.
    pub backfill_beam: f64,
}

impl Default for AsyncOptions {
    fn default() -> Self {
        Self::from_decode(DecodeOptions::default())
    }
}

impl AsyncOptions {
    /// Defaults for the async-only knobs; the gate follows the lattice beam.
    pub fn from_decode(decode: DecodeOptions) -> Self {
        AsyncOptions {
            decode,
            offset: 5,
            front_batch: 1,
            backfill_beam: decode.lattice_beam,
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        self.decode.validate()?;
        if self.offset == 0 {
            return Err(DecodeError::Options("offset must be at least 1".into()));
        }
        if self.front_batch == 0 {
            return Err(DecodeError::Options("front batch must be at least 1".into()));
        }
        if !(self.backfill_beam > 0.0) {
            return Err(DecodeError::Options("backfill beam must be positive".into()));
        }
        Ok(())
    }
}
