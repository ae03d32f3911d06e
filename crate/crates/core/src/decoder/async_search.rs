use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::time::Instant;

use crate::am::LogLikelihoods;
use crate::fst::{StateId, Wfst, EPSILON};
use crate::semiring::DualCost;

use super::lattice::Lattice;
use super::search::{check_inputs, cutoff, finish, rtf};
use super::token::{ForwardLink, Frontier, Outcome, Status, TokenId, TokenStore};
use super::{AsyncOptions, BigLmGraph, DecodeError, DecodeStats, Grammar};

/// Two-front decoder.
///
/// The exploration front expands only the best token of each
/// `(frame, graph state)` class; the others are deferred behind an implicit
/// link to it. `offset` frames later the backfill front admits deferred
/// tokens whose A* estimate `f + g*` is within `backfill_beam` of the frame's
/// best and replays their class representative's recorded arcs for them,
/// recomputing only the grammar residual. Cost improvements found this way
/// are pushed forward to the frontier, and a token that becomes best in its
/// class is expanded regularly.
pub fn decode_async(
    g: &BigLmGraph,
    ll: &LogLikelihoods,
    opts: &AsyncOptions,
) -> Result<(Lattice, DecodeStats), DecodeError> {
    decode_async_with(&g.hclg, g.residual.as_ref(), ll, opts)
}

pub(crate) fn decode_async_with<G: Grammar>(
    graph: &Wfst,
    grammar: &G,
    ll: &LogLikelihoods,
    opts: &AsyncOptions,
) -> Result<(Lattice, DecodeStats), DecodeError> {
    opts.validate()?;
    check_inputs(graph, ll)?;
    let timer = Instant::now();
    let mut d = AsyncDecoder::new(graph, grammar, ll, opts);
    let start = d.run(&timer)?;
    let mut stats = std::mem::take(&mut d.stats);
    let lattice = finish(&mut d.store, graph, grammar, start, opts.decode.lattice_beam, &mut stats)?;
    stats.num_frames = ll.num_frames();
    stats.wall_seconds = timer.elapsed().as_secs_f64();
    stats.rtf = rtf(stats.wall_seconds, ll);
    Ok((lattice, stats))
}

/// Gate queue entry, ordered by A* estimate then key.
struct Gated<S> {
    h: f64,
    hclg: StateId,
    lm: S,
    id: TokenId,
}

impl<S: Ord> PartialEq for Gated<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Ord> Eq for Gated<S> {}

impl<S: Ord> PartialOrd for Gated<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Ord> Ord for Gated<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.h
            .total_cmp(&other.h)
            .then_with(|| self.hclg.cmp(&other.hclg))
            .then_with(|| self.lm.cmp(&other.lm))
            .then_with(|| self.id.cmp(&other.id))
    }
}

struct Backfill<S> {
    frame: usize,
    best_h: f64,
    queue: BinaryHeap<Reverse<Gated<S>>>,
}

pub(crate) struct AsyncDecoder<'a, G: Grammar> {
    graph: &'a Wfst,
    grammar: &'a G,
    ll: &'a LogLikelihoods,
    opts: &'a AsyncOptions,
    pub(crate) store: TokenStore<G::State>,
    stats: DecodeStats,
    /// Best-in-class index: per frame, graph state to expanded representative.
    best: Vec<HashMap<StateId, TokenId>>,
    members: Vec<HashMap<StateId, Vec<TokenId>>>,
    /// Source cutoff used when frame `f` emitted.
    emit_cut: Vec<f64>,
    /// Cutoff for tokens within frame `f`.
    closure_cut: Vec<f64>,
    frontier: usize,
    next_backfill: usize,
    finished: bool,
    epoch: u32,
    dirty: BTreeSet<(usize, u32, StateId, G::State, TokenId)>,
    pending: Option<Backfill<G::State>>,
    /// `(representative link, replayed link)` pairs.
    #[cfg(test)]
    replayed: Vec<(ForwardLink, ForwardLink)>,
}

impl<'a, G: Grammar> AsyncDecoder<'a, G> {
    fn new(graph: &'a Wfst, grammar: &'a G, ll: &'a LogLikelihoods, opts: &'a AsyncOptions) -> Self {
        AsyncDecoder {
            graph,
            grammar,
            ll,
            opts,
            store: TokenStore::new(),
            stats: DecodeStats::default(),
            best: Vec::new(),
            members: Vec::new(),
            emit_cut: Vec::new(),
            closure_cut: Vec::new(),
            frontier: 0,
            next_backfill: 0,
            finished: false,
            epoch: 0,
            dirty: BTreeSet::new(),
            pending: None,
            #[cfg(test)]
            replayed: Vec::new(),
        }
    }

    /// Both fronts up to the last frame, then the remaining backfill.
    fn run(&mut self, timer: &Instant) -> Result<TokenId, DecodeError> {
        let start = self.init()?;
        let frames = self.ll.num_frames();
        let opts = self.opts;
        let mut t = 0;
        while t < frames {
            let turn = Instant::now();
            for _ in 0..opts.front_batch {
                if t >= frames {
                    break;
                }
                if t > 0 && t % opts.decode.prune_interval == 0 {
                    self.prune_periodic();
                }
                self.explore(t)?;
                t += 1;
                if self.store.frame(t).is_empty() {
                    self.stats.wall_seconds = timer.elapsed().as_secs_f64();
                    return Err(DecodeError::Failed {
                        frame: t,
                        stats: Box::new(std::mem::take(&mut self.stats)),
                    });
                }
            }
            self.stats.explore_seconds += turn.elapsed().as_secs_f64();
            let turn = Instant::now();
            while self.next_backfill + opts.offset <= self.frontier {
                self.backfill(self.next_backfill)?;
            }
            self.stats.backfill_seconds += turn.elapsed().as_secs_f64();
        }
        self.finished = true;
        let turn = Instant::now();
        while self.next_backfill <= self.frontier {
            self.backfill(self.next_backfill)?;
        }
        self.stats.backfill_seconds += turn.elapsed().as_secs_f64();
        Ok(start)
    }

    fn push_frame(&mut self, closure_cut: f64) {
        self.store.push_frame();
        self.best.push(HashMap::new());
        self.members.push(HashMap::new());
        self.emit_cut.push(f64::NEG_INFINITY);
        self.closure_cut.push(closure_cut);
    }

    fn init(&mut self) -> Result<TokenId, DecodeError> {
        let s0 = self.graph.start().ok_or(DecodeError::EmptyGraph)?;
        self.push_frame(self.opts.decode.beam);
        let (start, _) = self.relax(0, s0, self.grammar.start(), DualCost::one());
        self.settle_frame(0)?;
        Ok(start)
    }

    fn relax(&mut self, frame: usize, hclg: StateId, lm: G::State, cost: DualCost) -> (TokenId, Outcome) {
        let (id, outcome) = self.store.relax(frame, hclg, lm, cost, Status::Deferred);
        if outcome == Outcome::Created {
            self.members[frame].entry(hclg).or_default().push(id);
        }
        (id, outcome)
    }

    /// Ranks tokens within a class: cost order, then grammar state.
    fn beats(&self, a: TokenId, b: TokenId) -> bool {
        let (x, y) = (self.store.token(a), self.store.token(b));
        x.cost
            .cmp_cost(&y.cost)
            .then_with(|| x.lm.cmp(&y.lm))
            == Ordering::Less
    }

    fn step(&self, lm: G::State, olabel: u32) -> Result<(G::State, f64), DecodeError> {
        if olabel == EPSILON {
            Ok((lm, 0.0))
        } else {
            self.grammar.step(lm, olabel)
        }
    }

    /// Exploration front: frame `t` into `t + 1`, then settles frame `t + 1`.
    fn explore(&mut self, t: usize) -> Result<(), DecodeError> {
        let all: Vec<TokenId> = self.store.frame(t).to_vec();
        let mut costs: Vec<f64> = all.iter().map(|&id| self.store.token(id).cost.total()).collect();
        let cut = cutoff(&mut costs, self.opts.decode.beam, self.opts.decode.max_active);
        self.emit_cut[t] = cut;
        let mut sources: Vec<TokenId> = all
            .into_iter()
            .filter(|&id| {
                let tok = self.store.token(id);
                tok.status == Status::Expanded && !tok.emitted
            })
            .collect();
        sources.sort_by(|&a, &b| {
            let (x, y) = (self.store.token(a), self.store.token(b));
            x.cost
                .cmp_cost(&y.cost)
                .then_with(|| (x.hclg, x.lm).cmp(&(y.hclg, y.lm)))
        });
        self.push_frame(f64::INFINITY);
        let beam = self.opts.decode.beam;
        let scale = self.opts.decode.acoustic_scale;
        let mut next_cutoff = f64::INFINITY;
        for src in sources {
            self.store.token_mut(src).emitted = true;
            let (hclg, lm, cost) = {
                let tok = self.store.token(src);
                (tok.hclg, tok.lm, tok.cost)
            };
            if !(cost.total() <= cut) {
                continue;
            }
            for arc in self.graph.arcs(hclg) {
                if arc.ilabel == EPSILON {
                    continue;
                }
                let ac = self.ll.cost(t, arc.ilabel, scale);
                let (next_lm, res) = self.step(lm, arc.olabel)?;
                let graph_cost = arc.weight.graph + res;
                let new_cost = cost.times(DualCost::new(graph_cost, arc.weight.acoustic + ac));
                let total = new_cost.total();
                if !(total <= next_cutoff) {
                    continue;
                }
                if total + beam < next_cutoff {
                    next_cutoff = total + beam;
                }
                let (dest, outcome) = self.relax(t + 1, arc.nextstate, next_lm, new_cost);
                if outcome.effective() {
                    self.stats.propagations += 1;
                }
                self.store.add_link(
                    src,
                    ForwardLink {
                        dest,
                        ilabel: arc.ilabel,
                        olabel: arc.olabel,
                        hclg_graph: arc.weight.graph,
                        graph: graph_cost,
                        acoustic: arc.weight.acoustic + ac,
                    },
                );
            }
        }
        self.closure_cut[t + 1] = next_cutoff;
        self.frontier = t + 1;
        self.settle_frame(t + 1)?;
        self.stats.tokens_per_frame.push(self.store.frame(t + 1).len());
        Ok(())
    }

    /// Settles classes of the frontier frame in topological order: the best
    /// token of each class is expanded over input-epsilon arcs, the rest are
    /// deferred behind an implicit link.
    fn settle_frame(&mut self, f: usize) -> Result<(), DecodeError> {
        let cut = self.closure_cut[f];
        let mut heap: BinaryHeap<Reverse<(u32, StateId)>> = self.members[f]
            .keys()
            .map(|&s| Reverse((self.graph.eps_rank(s), s)))
            .collect();
        let mut seen: std::collections::HashSet<StateId> = self.members[f].keys().copied().collect();
        while let Some(Reverse((_, s))) = heap.pop() {
            let members = self.members[f][&s].clone();
            let mut rep = members[0];
            for &m in &members[1..] {
                if self.beats(m, rep) {
                    rep = m;
                }
            }
            for &m in &members {
                let tok = self.store.token_mut(m);
                if m == rep {
                    tok.status = Status::Expanded;
                    tok.implicit = None;
                } else {
                    tok.status = Status::Deferred;
                    tok.implicit = Some(rep);
                }
            }
            self.best[f].insert(s, rep);
            let (lm, cost) = {
                let tok = self.store.token(rep);
                (tok.lm, tok.cost)
            };
            if !(cost.total() <= cut) {
                continue;
            }
            for arc in self.graph.arcs(s) {
                if arc.ilabel != EPSILON {
                    break;
                }
                let (next_lm, res) = self.step(lm, arc.olabel)?;
                let graph_cost = arc.weight.graph + res;
                let new_cost = cost.times(DualCost::new(graph_cost, arc.weight.acoustic));
                if !(new_cost.total() <= cut) {
                    continue;
                }
                let (dest, outcome) = self.relax(f, arc.nextstate, next_lm, new_cost);
                if outcome.effective() {
                    self.stats.propagations += 1;
                }
                self.store.add_link(
                    rep,
                    ForwardLink {
                        dest,
                        ilabel: EPSILON,
                        olabel: arc.olabel,
                        hclg_graph: arc.weight.graph,
                        graph: graph_cost,
                        acoustic: arc.weight.acoustic,
                    },
                );
                if seen.insert(arc.nextstate) {
                    heap.push(Reverse((self.graph.eps_rank(arc.nextstate), arc.nextstate)));
                }
            }
        }
        Ok(())
    }

    /// Lattice pruning from the exploration frontier. Frames the backfill
    /// front has not passed yet are left intact.
    fn prune_periodic(&mut self) {
        let below = self.next_backfill.min(self.frontier);
        self.store
            .prune(self.graph, self.opts.decode.lattice_beam, Frontier::Zero, below);
    }

    /// Backward estimate from a token to the exploration frontier.
    ///
    /// Expanded frontier tokens get 0 (their final cost once the audio has
    /// ended); other expanded tokens take the best link; deferred tokens
    /// borrow the estimate of their class representative.
    fn gstar(&mut self, id: TokenId) -> f64 {
        let tok = self.store.token(id);
        if tok.gepoch == self.epoch {
            return tok.gstar;
        }
        let value = if tok.status == Status::Deferred {
            match tok.implicit {
                Some(rep) if rep != id && self.store.token(rep).alive => self.gstar(rep),
                _ => f64::INFINITY,
            }
        } else if tok.frame == self.frontier && !self.finished {
            0.0
        } else {
            let mut g = f64::INFINITY;
            if tok.frame == self.frontier {
                if let Some(w) = self.graph.final_weight(tok.hclg) {
                    g = w.total() + self.grammar.final_cost(tok.lm);
                }
            }
            let links: Vec<(TokenId, f64)> = tok.links.iter().map(|l| (l.dest, l.cost().total())).collect();
            for (dest, c) in links {
                if self.store.token(dest).alive {
                    g = g.min(c + self.gstar(dest));
                }
            }
            g
        };
        let tok = self.store.token_mut(id);
        tok.gstar = value;
        tok.gepoch = self.epoch;
        value
    }

    /// A* gate for a deferred token against the frame's best estimate.
    fn should_backfill(&mut self, id: TokenId, best_h: f64) -> Option<f64> {
        let g = self.gstar(id);
        if !g.is_finite() {
            return None;
        }
        let h = self.store.token(id).cost.total() + g;
        (h - best_h <= self.opts.backfill_beam).then_some(h)
    }

    fn enqueue(&mut self, id: TokenId) {
        let Some(best_h) = self.pending.as_ref().map(|p| p.best_h) else {
            return;
        };
        if let Some(h) = self.should_backfill(id, best_h) {
            let tok = self.store.token(id);
            let item = Gated {
                h,
                hclg: tok.hclg,
                lm: tok.lm,
                id,
            };
            if let Some(p) = self.pending.as_mut() {
                p.queue.push(Reverse(item));
            }
        }
    }

    /// Backfill front for frame `b`.
    fn backfill(&mut self, b: usize) -> Result<(), DecodeError> {
        self.epoch += 1;
        let tokens: Vec<TokenId> = self.store.frame(b).to_vec();
        let mut best_h = f64::INFINITY;
        for &id in &tokens {
            let h = self.store.token(id).cost.total() + self.gstar(id);
            best_h = best_h.min(h);
        }
        self.pending = Some(Backfill {
            frame: b,
            best_h,
            queue: BinaryHeap::new(),
        });
        for &id in &tokens {
            if self.store.token(id).status == Status::Deferred {
                self.enqueue(id);
            }
        }
        loop {
            let next = self.pending.as_mut().and_then(|p| p.queue.pop());
            let Some(Reverse(item)) = next else { break };
            let tok = self.store.token(item.id);
            if !tok.alive || tok.status != Status::Deferred {
                continue;
            }
            let Some(&rep) = self.best[b].get(&tok.hclg) else {
                continue;
            };
            self.replay(item.id, rep)?;
            self.drain()?;
        }
        self.pending = None;
        self.next_backfill = b + 1;
        Ok(())
    }

    /// Follows the representative's recorded arcs for a deferred token.
    /// Acoustic and graph-arc costs are copied; only the residual is
    /// recomputed for the token's own grammar state.
    fn replay(&mut self, u: TokenId, rep: TokenId) -> Result<(), DecodeError> {
        {
            let tok = self.store.token_mut(u);
            tok.status = Status::Expanded;
            tok.emitted = true;
        }
        let (lm, cost) = {
            let tok = self.store.token(u);
            (tok.lm, tok.cost)
        };
        let links = self.store.token(rep).links.clone();
        for l in links {
            let (frame, hclg) = {
                let d = self.store.token(l.dest);
                if !d.alive {
                    continue;
                }
                (d.frame, d.hclg)
            };
            let (next_lm, res) = self.step(lm, l.olabel)?;
            let graph_cost = l.hclg_graph + res;
            let new_cost = cost.times(DualCost::new(graph_cost, l.acoustic));
            let (dest, outcome) = self.relax(frame, hclg, next_lm, new_cost);
            let link = ForwardLink {
                dest,
                graph: graph_cost,
                ..l
            };
            #[cfg(test)]
            self.replayed.push((l, link));
            self.store.add_link(u, link);
            if outcome.effective() {
                self.stats.propagations_backfill += 1;
                self.mark(dest);
            }
        }
        Ok(())
    }

    fn mark(&mut self, id: TokenId) {
        let t = self.store.token(id);
        self.dirty
            .insert((t.frame, self.graph.eps_rank(t.hclg), t.hclg, t.lm, id));
    }

    /// Settles every token whose cost changed, in (frame, epsilon rank) order
    /// so each is handled after all of its changed predecessors.
    fn drain(&mut self) -> Result<(), DecodeError> {
        while let Some((f, _, hclg, _, x)) = self.dirty.pop_first() {
            if !self.store.token(x).alive {
                continue;
            }
            match self.best[f].get(&hclg).copied() {
                Some(rep) if rep == x => self.propagate(x)?,
                Some(rep) if !self.beats(x, rep) => {
                    if self.store.token(x).status == Status::Expanded {
                        self.propagate(x)?;
                    } else {
                        self.store.token_mut(x).implicit = Some(rep);
                        if self.pending.as_ref().is_some_and(|p| p.frame == f) {
                            self.enqueue(x);
                        }
                    }
                }
                incumbent => self.promote(x, incumbent)?,
            }
        }
        Ok(())
    }

    /// Makes `x` the representative of its class. The displaced token keeps
    /// its links and points at `x`; a deferred `x` is expanded regularly.
    fn promote(&mut self, x: TokenId, incumbent: Option<TokenId>) -> Result<(), DecodeError> {
        let (f, hclg) = {
            let t = self.store.token(x);
            (t.frame, t.hclg)
        };
        self.best[f].insert(hclg, x);
        if incumbent.is_some() {
            for m in self.members[f][&hclg].clone() {
                if m != x {
                    self.store.token_mut(m).implicit = Some(x);
                }
            }
        }
        self.store.token_mut(x).implicit = None;
        if self.store.token(x).status == Status::Expanded {
            self.propagate(x)
        } else {
            self.store.token_mut(x).status = Status::Expanded;
            self.expand_regular(x)
        }
    }

    /// Pushes a lower cost of an expanded token along its links.
    fn propagate(&mut self, x: TokenId) -> Result<(), DecodeError> {
        let cost = self.store.token(x).cost;
        let links = self.store.token(x).links.clone();
        for l in links {
            let d = self.store.token(l.dest);
            if !d.alive {
                continue;
            }
            let cand = cost.times(l.cost());
            if cand.better_than(&d.cost) {
                self.store.token_mut(l.dest).cost = cand;
                self.stats.propagations_backfill += 1;
                self.mark(l.dest);
            }
        }
        // A representative still waiting at the frontier emits later with
        // its updated cost; one behind the frontier that never emitted does
        // so now.
        let t = self.store.token(x);
        if t.frame < self.frontier && !t.emitted {
            self.expand_emitting(x)?;
        }
        Ok(())
    }

    /// Regular expansion of a newly promoted token, using the cutoffs its
    /// frames had on the exploration front.
    fn expand_regular(&mut self, x: TokenId) -> Result<(), DecodeError> {
        let (f, hclg, lm, cost) = {
            let t = self.store.token(x);
            (t.frame, t.hclg, t.lm, t.cost)
        };
        let cut = self.closure_cut[f];
        if cost.total() <= cut {
            for arc in self.graph.arcs(hclg) {
                if arc.ilabel != EPSILON {
                    break;
                }
                let (next_lm, res) = self.step(lm, arc.olabel)?;
                let graph_cost = arc.weight.graph + res;
                let new_cost = cost.times(DualCost::new(graph_cost, arc.weight.acoustic));
                if !(new_cost.total() <= cut) {
                    continue;
                }
                let (dest, outcome) = self.relax(f, arc.nextstate, next_lm, new_cost);
                self.store.add_link(
                    x,
                    ForwardLink {
                        dest,
                        ilabel: EPSILON,
                        olabel: arc.olabel,
                        hclg_graph: arc.weight.graph,
                        graph: graph_cost,
                        acoustic: arc.weight.acoustic,
                    },
                );
                if outcome.effective() {
                    self.stats.propagations_backfill += 1;
                    self.mark(dest);
                }
            }
        }
        if f < self.frontier {
            self.expand_emitting(x)?;
        }
        Ok(())
    }

    fn expand_emitting(&mut self, x: TokenId) -> Result<(), DecodeError> {
        let (f, hclg, lm, cost) = {
            let t = self.store.token_mut(x);
            t.emitted = true;
            (t.frame, t.hclg, t.lm, t.cost)
        };
        if !(cost.total() <= self.emit_cut[f]) {
            return Ok(());
        }
        let cut = self.closure_cut[f + 1];
        let scale = self.opts.decode.acoustic_scale;
        for arc in self.graph.arcs(hclg) {
            if arc.ilabel == EPSILON {
                continue;
            }
            let ac = self.ll.cost(f, arc.ilabel, scale);
            let (next_lm, res) = self.step(lm, arc.olabel)?;
            let graph_cost = arc.weight.graph + res;
            let new_cost = cost.times(DualCost::new(graph_cost, arc.weight.acoustic + ac));
            if !(new_cost.total() <= cut) {
                continue;
            }
            let (dest, outcome) = self.relax(f + 1, arc.nextstate, next_lm, new_cost);
            self.store.add_link(
                x,
                ForwardLink {
                    dest,
                    ilabel: arc.ilabel,
                    olabel: arc.olabel,
                    hclg_graph: arc.weight.graph,
                    graph: graph_cost,
                    acoustic: arc.weight.acoustic + ac,
                },
            );
            if outcome.effective() {
                self.stats.propagations_backfill += 1;
                self.mark(dest);
            }
        }
        Ok(())
    }
}
