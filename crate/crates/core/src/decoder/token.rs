use std::collections::HashMap;
use std::hash::Hash;

use crate::fst::{Label, StateId, Wfst, EPSILON};
use crate::semiring::DualCost;

pub type TokenId = usize;

/// Expansion state of a token in the asynchronous decoder. The synchronous
/// decoders only use `Expanded`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Expanded,
    /// Not best in its class; waits for the backfill front behind an
    /// implicit link.
    Deferred,
}

/// A recorded arc traversal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardLink {
    pub dest: TokenId,
    pub ilabel: Label,
    pub olabel: Label,
    /// Graph cost of the decoding-graph arc alone.
    pub hclg_graph: f64,
    /// Graph cost including the grammar residual.
    pub graph: f64,
    pub acoustic: f64,
}

impl ForwardLink {
    pub fn cost(&self) -> DualCost {
        DualCost::new(self.graph, self.acoustic)
    }

    pub fn is_emitting(&self) -> bool {
        self.ilabel != EPSILON
    }
}

#[derive(Clone, Debug)]
pub struct Token<S> {
    pub frame: usize,
    pub hclg: StateId,
    pub lm: S,
    pub cost: DualCost,
    pub extra: f64,
    pub links: Vec<ForwardLink>,
    pub alive: bool,
    pub status: Status,
    /// Emitting arcs have been considered.
    pub emitted: bool,
    pub implicit: Option<TokenId>,
    /// Backward estimate to the exploration frontier, valid for `gepoch`.
    pub gstar: f64,
    pub gepoch: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Created,
    Improved,
    Unchanged,
}

impl Outcome {
    pub fn effective(self) -> bool {
        self != Outcome::Unchanged
    }
}

#[derive(Clone, Debug)]
struct Frame<S> {
    map: HashMap<(StateId, S), TokenId>,
    list: Vec<TokenId>,
}

impl<S> Default for Frame<S> {
    fn default() -> Self {
        Frame {
            map: HashMap::new(),
            list: Vec::new(),
        }
    }
}

/// Arena of tokens with one `(graph state, grammar state)` index per frame.
#[derive(Clone, Debug)]
pub struct TokenStore<S> {
    tokens: Vec<Token<S>>,
    frames: Vec<Frame<S>>,
}

/// How frontier tokens are seeded when computing extra costs.
pub enum Frontier<'a> {
    /// All frontier tokens count as final with extra cost 0.
    Zero,
    /// Final costs per frontier token; `None` marks a non-final token.
    Final(&'a dyn Fn(TokenId) -> Option<DualCost>),
}

impl<S: Copy + Eq + Hash + Ord> TokenStore<S> {
    pub fn new() -> Self {
        TokenStore {
            tokens: Vec::new(),
            frames: Vec::new(),
        }
    }

    pub fn push_frame(&mut self) -> usize {
        self.frames.push(Frame::default());
        self.frames.len() - 1
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn token(&self, id: TokenId) -> &Token<S> {
        &self.tokens[id]
    }

    pub fn token_mut(&mut self, id: TokenId) -> &mut Token<S> {
        &mut self.tokens[id]
    }

    /// Live tokens of `frame` in creation order.
    pub fn frame(&self, frame: usize) -> &[TokenId] {
        &self.frames[frame].list
    }

    pub fn find(&self, frame: usize, hclg: StateId, lm: S) -> Option<TokenId> {
        self.frames[frame].map.get(&(hclg, lm)).copied()
    }

    pub fn num_live(&self) -> usize {
        self.frames.iter().map(|f| f.list.len()).sum()
    }

    /// Finds or creates the token for a key and lowers its cost to `cost`
    /// if that is better.
    pub fn relax(
        &mut self,
        frame: usize,
        hclg: StateId,
        lm: S,
        cost: DualCost,
        status: Status,
    ) -> (TokenId, Outcome) {
        if let Some(&id) = self.frames[frame].map.get(&(hclg, lm)) {
            let tok = &mut self.tokens[id];
            if cost.better_than(&tok.cost) {
                tok.cost = cost;
                (id, Outcome::Improved)
            } else {
                (id, Outcome::Unchanged)
            }
        } else {
            let id = self.tokens.len();
            self.tokens.push(Token {
                frame,
                hclg,
                lm,
                cost,
                extra: 0.0,
                links: Vec::new(),
                alive: true,
                status,
                emitted: false,
                implicit: None,
                gstar: f64::INFINITY,
                gepoch: 0,
            });
            self.frames[frame].map.insert((hclg, lm), id);
            self.frames[frame].list.push(id);
            (id, Outcome::Created)
        }
    }

    pub fn add_link(&mut self, src: TokenId, link: ForwardLink) {
        self.tokens[src].links.push(link);
    }

    /// Tokens of `frame` grouped for a backward pass: descending input-epsilon
    /// rank of their graph state, so same-frame link targets come first.
    pub fn backward_order(&self, frame: usize, graph: &Wfst) -> Vec<TokenId> {
        let mut ids = self.frames[frame].list.clone();
        ids.sort_by_key(|&id| {
            let t = &self.tokens[id];
            (
                std::cmp::Reverse(graph.eps_rank(t.hclg)),
                t.status == Status::Deferred,
                t.lm,
            )
        });
        ids
    }

    /// Extra-cost lattice pruning.
    ///
    /// Extra costs are computed backwards from the last frame, seeded per
    /// `frontier`. Links and tokens are only removed in frames below
    /// `prune_below`; deferred tokens at or above it count as extra 0.
    /// With [`Frontier::Zero`] the frontier frame itself is left untouched.
    /// Returns the number of deleted tokens.
    pub fn prune(
        &mut self,
        graph: &Wfst,
        lattice_beam: f64,
        frontier: Frontier<'_>,
        prune_below: usize,
    ) -> usize {
        let Some(last) = self.frames.len().checked_sub(1) else {
            return 0;
        };
        let best_final = match &frontier {
            Frontier::Zero => 0.0,
            Frontier::Final(f) => self.frames[last]
                .list
                .iter()
                .filter_map(|&id| f(id).map(|w| self.tokens[id].cost.times(w).total()))
                .fold(f64::INFINITY, f64::min),
        };
        for f in (0..=last).rev() {
            if f == last && matches!(frontier, Frontier::Zero) {
                for &id in &self.frames[f].list {
                    self.tokens[id].extra = 0.0;
                }
                continue;
            }
            let prunable = f < prune_below;
            for id in self.backward_order(f, graph) {
                if self.tokens[id].status == Status::Deferred && !prunable {
                    self.tokens[id].extra = 0.0;
                    continue;
                }
                let mut extra = f64::INFINITY;
                if f == last {
                    if let Frontier::Final(fin) = &frontier {
                        if let Some(w) = fin(id) {
                            extra = self.tokens[id].cost.times(w).total() - best_final;
                        }
                    }
                }
                let tot = self.tokens[id].cost.total();
                let mut links = std::mem::take(&mut self.tokens[id].links);
                links.retain(|l| {
                    let dest = &self.tokens[l.dest];
                    let slack = tot + l.cost().total() - dest.cost.total();
                    let link_extra = (dest.extra + slack).max(0.0);
                    let keep = dest.alive && link_extra.is_finite() && link_extra <= lattice_beam;
                    if keep {
                        extra = extra.min(link_extra);
                    }
                    keep || !prunable
                });
                self.tokens[id].links = links;
                if !(extra <= lattice_beam) {
                    extra = f64::INFINITY;
                }
                self.tokens[id].extra = extra.max(0.0);
            }
        }
        let mut deleted = 0;
        for f in 0..prune_below.min(self.frames.len()) {
            let doomed: Vec<TokenId> = self.frames[f]
                .list
                .iter()
                .copied()
                .filter(|&id| self.tokens[id].extra.is_infinite())
                .collect();
            for id in doomed {
                self.delete(id);
                deleted += 1;
            }
        }
        deleted
    }

    fn delete(&mut self, id: TokenId) {
        let t = &mut self.tokens[id];
        t.alive = false;
        t.links.clear();
        let (frame, key) = (t.frame, (t.hclg, t.lm));
        let fr = &mut self.frames[frame];
        fr.map.remove(&key);
        fr.list.retain(|&x| x != id);
    }

    /// Periodic pruning: tokens on the last frame act as final with extra
    /// cost 0; everything before it is pruned to `lattice_beam`.
    pub fn prune_active_tokens(&mut self, graph: &Wfst, lattice_beam: f64) -> usize {
        let last = self.frames.len().saturating_sub(1);
        self.prune(graph, lattice_beam, Frontier::Zero, last)
    }
}

impl<S: Copy + Eq + Hash + Ord> Default for TokenStore<S> {
    fn default() -> Self {
        Self::new()
    }
}
