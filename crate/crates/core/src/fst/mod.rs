//! Weighted finite-state transducers over [`DualCost`](crate::DualCost).

mod compose;
mod paths;
mod text;
mod wfst;

pub use compose::compose_static;
pub use paths::{distance_to_final, enumerate_paths, shortest_path, Path};
pub use text::{parse_weight, read_text_fst, write_text_fst};
pub use wfst::{coaccessible, connect, Arc, Label, StateId, SymbolTable, Wfst, WfstBuilder, EPSILON};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FstError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input-epsilon cycle through state {0}")]
    EpsilonCycle(StateId),
    #[error("state {0} does not exist")]
    DanglingState(StateId),
    #[error("machine has states but no start state")]
    NoStart,
    #[error("no accepting path")]
    NoPath,
    #[error("negative-cost cycle")]
    NegativeCycle,
    #[error("more than {0} paths")]
    Capacity(usize),
    #[error("symbol table: {0}")]
    Symbols(String),
}

pub type Result<T> = std::result::Result<T, FstError>;
