use crate::fst::{Arc, Wfst, WfstBuilder, EPSILON};
use crate::semiring::DualCost;

use super::{BackoffLm, LmError, LmState, Result};

/// Materializes the model as a word acceptor with one state per context.
///
/// Backoff becomes an input-epsilon arc to the parent context. Contexts that
/// list every word explicitly get no backoff arc, so such models yield graphs
/// whose state determines the model context.
pub fn lm_to_wfst(lm: &BackoffLm) -> Result<Wfst> {
    let vocab = lm.vocabulary();
    if vocab.is_empty() && lm.eos().is_none() {
        return Err(LmError::Empty);
    }
    let mut b = WfstBuilder::new();
    for _ in 0..lm.num_states() {
        b.add_state();
    }
    b.set_start(lm.start().0 as usize);
    for s in 0..lm.num_states() {
        let state = LmState(s as u32);
        let explicit = lm.explicit_arcs(state);
        let mut listed = 0;
        let mut has_eos = false;
        for &(w, cost, next) in &explicit {
            if Some(w) == lm.bos() {
                continue;
            }
            if Some(w) == lm.eos() {
                b.set_final(s, DualCost::graph_only(cost));
                has_eos = true;
                continue;
            }
            listed += 1;
            b.add_arc(s, Arc::new(w, w, DualCost::graph_only(cost), next.0 as usize));
        }
        if lm.eos().is_none() {
            b.set_final(s, DualCost::one());
        }
        let complete = listed == vocab.len() && (has_eos || lm.eos().is_none());
        if let Some((cost, parent)) = lm.backoff_arc(state) {
            if !complete {
                b.add_arc(
                    s,
                    Arc::new(EPSILON, EPSILON, DualCost::graph_only(cost), parent.0 as usize),
                );
            }
        }
    }
    let fst = b
        .build()
        .expect("backoff arcs strictly shorten the history");
    let symbols = lm.symbols().clone();
    Ok(fst.with_symbols(Some(symbols.clone()), Some(symbols)))
}
