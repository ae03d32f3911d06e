//! Lattice-generating WFST decoders for speech recognition.
//!
//! Three decoders share one token store and lattice representation:
//!
//! * [`decoder::decode`]: frame-synchronous token passing over a single
//!   decoding graph with beam, histogram and lattice pruning.
//! * [`decoder::decode_biglm`]: the same search over `(graph state, LM state)`
//!   pairs, composing the graph on the fly with a [`lm::ResidualGrammar`] that
//!   swaps the small LM baked into the graph for a larger one.
//! * [`decoder::decode_async`]: a two-front variant that only expands the best
//!   token per graph state at the search frontier and back-fills the others a
//!   few frames later, gated by an A* estimate and replaying the expanded
//!   token's recorded arcs.
//!
//! Supporting modules cover the cost semiring, text FSTs and composition,
//! ARPA backoff models, acoustic score matrices and lattice evaluation.

// NaN-aware comparisons are written as negations on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod am;
pub mod decoder;
pub mod eval;
pub mod fst;
pub mod lm;
pub mod semiring;
pub mod synth;

pub use semiring::DualCost;
