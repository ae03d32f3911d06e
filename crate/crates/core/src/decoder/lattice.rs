use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use crate::fst::{shortest_path, Arc, FstError, Label, StateId, Wfst, WfstBuilder};
use crate::semiring::DualCost;

use super::token::{TokenId, TokenStore};

/// State-level lattice: a trimmed [`Wfst`] plus the frame of every state.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub fst: Wfst,
    pub frames: Vec<usize>,
    pub num_frames: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestPath {
    pub cost: DualCost,
    pub words: Vec<Label>,
    pub alignment: Vec<Label>,
}

impl Lattice {
    /// Collects live tokens reachable from `start` and able to reach a final
    /// token. States are numbered in `(frame, graph state, grammar state)` order.
    pub fn from_store<S: Copy + Eq + Hash + Ord>(
        store: &TokenStore<S>,
        start: TokenId,
        finals: &HashMap<TokenId, DualCost>,
    ) -> Lattice {
        let num_frames = store.num_frames().saturating_sub(1);
        let mut reach: HashMap<TokenId, bool> = HashMap::new();
        let mut stack = vec![start];
        reach.insert(start, false);
        let mut order = Vec::new();
        while let Some(id) = stack.pop() {
            order.push(id);
            for l in &store.token(id).links {
                if store.token(l.dest).alive && !reach.contains_key(&l.dest) {
                    reach.insert(l.dest, false);
                    stack.push(l.dest);
                }
            }
        }
        // Links point forward in (frame, epsilon rank), so sorting by frame
        // descending and repeating until stable marks co-reachability.
        order.sort_by_key(|&id| std::cmp::Reverse(store.token(id).frame));
        loop {
            let mut changed = false;
            for &id in &order {
                if reach[&id] {
                    continue;
                }
                let live = finals.contains_key(&id)
                    || store
                        .token(id)
                        .links
                        .iter()
                        .any(|l| reach.get(&l.dest).copied().unwrap_or(false));
                if live {
                    reach.insert(id, true);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut kept: Vec<TokenId> = order.into_iter().filter(|id| reach[id]).collect();
        kept.sort_by_key(|&id| {
            let t = store.token(id);
            (t.frame, t.hclg, t.lm)
        });
        let index: HashMap<TokenId, StateId> =
            kept.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut b = WfstBuilder::new();
        for _ in &kept {
            b.add_state();
        }
        if let Some(&s) = index.get(&start) {
            b.set_start(s);
        }
        for (&id, &s) in &index {
            for l in &store.token(id).links {
                if let Some(&d) = index.get(&l.dest) {
                    b.add_arc(s, Arc::new(l.ilabel, l.olabel, l.cost(), d));
                }
            }
            if let Some(&w) = finals.get(&id) {
                b.set_final(s, w);
            }
        }
        let fst = if kept.is_empty() {
            Wfst::empty()
        } else {
            b.build().expect("lattice links are epsilon-acyclic")
        };
        Lattice {
            fst,
            frames: kept.iter().map(|&id| store.token(id).frame).collect(),
            num_frames,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.fst.is_empty()
    }

    /// Single-path lattice spelling out `path` with one state per arc.
    pub fn from_path(ilabels: &[Label], olabels: &[Label], costs: &[DualCost], final_cost: DualCost) -> Lattice {
        let mut b = WfstBuilder::new();
        let mut frames = vec![0];
        b.add_state();
        b.set_start(0);
        let mut frame = 0;
        for (i, ((&il, &ol), &c)) in ilabels.iter().zip(olabels).zip(costs).enumerate() {
            let s = b.add_state();
            if il != 0 {
                frame += 1;
            }
            frames.push(frame);
            b.add_arc(i, Arc::new(il, ol, c, s));
        }
        b.set_final(ilabels.len(), final_cost);
        Lattice {
            fst: b.build().expect("linear machine"),
            frames,
            num_frames: frame,
        }
    }
}

/// Minimum-cost path of a lattice.
pub fn best_path(lat: &Lattice) -> Result<BestPath, FstError> {
    let p = shortest_path(&lat.fst)?;
    Ok(BestPath {
        cost: p.cost,
        words: p.words(),
        alignment: p.emitted(),
    })
}

/// Token counts at offsets `0..=window` behind the last frame of `store`
/// that survive lattice-beam pruning when the last frame is treated as final
/// (extra cost `tot - best` there). Stops early at frame 0.
///
/// Tokens in `dead` are treated as already deleted; tokens failing this pass
/// are added to it, so repeated calls as the frontier advances see a shrinking
/// token set, as a decoder pruning at every frame would.
pub fn survival_counts<S: Copy + Eq + Hash + Ord>(
    store: &TokenStore<S>,
    graph: &Wfst,
    window: usize,
    lattice_beam: f64,
    dead: &mut HashSet<TokenId>,
) -> Vec<usize> {
    let Some(last) = store.num_frames().checked_sub(1) else {
        return Vec::new();
    };
    let window = window.min(last);
    let mut extra: HashMap<TokenId, f64> = HashMap::new();
    let best = store
        .frame(last)
        .iter()
        .map(|&id| store.token(id).cost.total())
        .fold(f64::INFINITY, f64::min);
    let mut counts = vec![0; window + 1];
    for off in 0..=window {
        let f = last - off;
        for id in store.backward_order(f, graph) {
            if dead.contains(&id) {
                continue;
            }
            let t = store.token(id);
            let mut e = if off == 0 {
                t.cost.total() - best
            } else {
                f64::INFINITY
            };
            for l in &t.links {
                if let Some(&de) = extra.get(&l.dest) {
                    let slack = t.cost.total() + l.cost().total() - store.token(l.dest).cost.total();
                    e = e.min((de + slack).max(0.0));
                }
            }
            if e <= lattice_beam {
                counts[off] += 1;
                extra.insert(id, e);
            } else {
                dead.insert(id);
            }
        }
    }
    counts
}
