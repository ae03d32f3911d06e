use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use crate::am::LogLikelihoods;
use crate::fst::{StateId, Wfst, EPSILON};
use crate::semiring::DualCost;

use super::lattice::{survival_counts, Lattice};
use super::token::{ForwardLink, Frontier, Status, TokenId, TokenStore};
use super::{BigLmGraph, DecodeError, DecodeOptions, DecodeStats, Grammar, NoGrammar};

/// Baseline decoder over a single graph.
pub fn decode(
    graph: &Wfst,
    ll: &LogLikelihoods,
    opts: &DecodeOptions,
) -> Result<(Lattice, DecodeStats), DecodeError> {
    decode_with(graph, &NoGrammar, ll, opts)
}

/// Decoder over `(graph state, residual state)` pairs.
pub fn decode_biglm(
    g: &BigLmGraph,
    ll: &LogLikelihoods,
    opts: &DecodeOptions,
) -> Result<(Lattice, DecodeStats), DecodeError> {
    decode_with(&g.hclg, g.residual.as_ref(), ll, opts)
}

/// Frame-synchronous token passing over `graph` composed on the fly with
/// `grammar`.
pub fn decode_with<G: Grammar>(
    graph: &Wfst,
    grammar: &G,
    ll: &LogLikelihoods,
    opts: &DecodeOptions,
) -> Result<(Lattice, DecodeStats), DecodeError> {
    opts.validate()?;
    check_inputs(graph, ll)?;
    let timer = Instant::now();
    let mut s = Sync::new(graph, grammar, ll, opts);
    let start = s.init()?;
    let frames = ll.num_frames();
    let mut survival = SurvivalAccumulator::new(opts.survival_window);
    survival.record(&s.store, graph, opts.lattice_beam);
    for t in 0..frames {
        if t > 0 && t % opts.prune_interval == 0 {
            s.store.prune_active_tokens(graph, opts.lattice_beam);
        }
        let cutoff = s.process_emitting(t)?;
        s.process_nonemitting(t + 1, cutoff)?;
        let live = s.store.frame(t + 1).len();
        s.stats.tokens_per_frame.push(live);
        if live == 0 {
            s.stats.wall_seconds = timer.elapsed().as_secs_f64();
            return Err(DecodeError::Failed {
                frame: t + 1,
                stats: Box::new(s.stats),
            });
        }
        survival.record(&s.store, graph, opts.lattice_beam);
    }
    let lattice = finish(&mut s.store, graph, grammar, start, opts.lattice_beam, &mut s.stats)?;
    s.stats.survival = survival.mean();
    s.stats.num_frames = frames;
    s.stats.wall_seconds = timer.elapsed().as_secs_f64();
    s.stats.rtf = rtf(s.stats.wall_seconds, ll);
    Ok((lattice, s.stats))
}

pub(crate) fn rtf(wall: f64, ll: &LogLikelihoods) -> f64 {
    let audio = ll.duration();
    if audio > 0.0 {
        wall / audio
    } else {
        0.0
    }
}

pub(crate) fn check_inputs(graph: &Wfst, ll: &LogLikelihoods) -> Result<(), DecodeError> {
    if graph.is_empty() {
        return Err(DecodeError::EmptyGraph);
    }
    let max = graph.max_ilabel();
    if max as usize > ll.num_labels() && ll.num_frames() > 0 {
        return Err(DecodeError::Labels {
            label: max,
            labels: ll.num_labels(),
        });
    }
    Ok(())
}

/// Final pruning against true final costs, then lattice extraction.
pub(crate) fn finish<G: Grammar>(
    store: &mut TokenStore<G::State>,
    graph: &Wfst,
    grammar: &G,
    start: TokenId,
    lattice_beam: f64,
    stats: &mut DecodeStats,
) -> Result<Lattice, DecodeError> {
    let last = store.num_frames() - 1;
    let mut finals: HashMap<TokenId, DualCost> = HashMap::new();
    for &id in store.frame(last) {
        let t = store.token(id);
        if let Some(w) = graph.final_weight(t.hclg) {
            let w = DualCost::new(w.graph + grammar.final_cost(t.lm), w.acoustic);
            if t.cost.times(w).is_finite() {
                finals.insert(id, w);
            }
        }
    }
    if finals.is_empty() {
        return Err(DecodeError::Failed {
            frame: last,
            stats: Box::new(stats.clone()),
        });
    }
    let lookup = |id: TokenId| finals.get(&id).copied();
    store.prune(graph, lattice_beam, Frontier::Final(&lookup), last + 1);
    let finals: HashMap<TokenId, DualCost> = finals
        .into_iter()
        .filter(|(id, _)| store.token(*id).alive)
        .collect();
    let lat = Lattice::from_store(store, start, &finals);
    if lat.is_empty() {
        return Err(DecodeError::Failed {
            frame: last,
            stats: Box::new(stats.clone()),
        });
    }
    Ok(lat)
}

/// Histogram and beam cutoff over `costs` (totals).
pub(crate) fn cutoff(costs: &mut [f64], beam: f64, max_active: usize) -> f64 {
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cut = best + beam;
    if costs.len() > max_active {
        let (_, kth, _) = costs.select_nth_unstable_by(max_active - 1, f64::total_cmp);
        cut = cut.min(*kth);
    }
    cut
}

/// Per token frame, survivor counts as the frontier moves `0..=window`
/// frames past it. Only frames seen at every offset enter the mean, so all
/// offsets average over the same frames.
pub(crate) struct SurvivalAccumulator {
    window: usize,
    per_frame: Vec<Vec<usize>>,
    dead: HashSet<TokenId>,
}

impl SurvivalAccumulator {
    pub fn new(window: usize) -> Self {
        SurvivalAccumulator {
            window,
            per_frame: Vec::new(),
            dead: HashSet::new(),
        }
    }

    pub fn record<S: Copy + Eq + std::hash::Hash + Ord>(
        &mut self,
        store: &TokenStore<S>,
        graph: &Wfst,
        lattice_beam: f64,
    ) {
        if self.window == 0 {
            return;
        }
        let last = store.num_frames() - 1;
        if self.per_frame.len() < last + 1 {
            self.per_frame.resize(last + 1, Vec::new());
        }
        for (off, c) in survival_counts(store, graph, self.window, lattice_beam, &mut self.dead).into_iter().enumerate() {
            let row = &mut self.per_frame[last - off];
            debug_assert_eq!(row.len(), off);
            row.push(c);
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let full: Vec<&Vec<usize>> = self.per_frame.iter().filter(|r| r.len() == self.window + 1).collect();
        if full.is_empty() {
            return Vec::new();
        }
        (0..=self.window)
            .map(|k| full.iter().map(|r| r[k] as f64).sum::<f64>() / full.len() as f64)
            .collect()
    }
}

struct Sync<'a, G: Grammar> {
    graph: &'a Wfst,
    grammar: &'a G,
    ll: &'a LogLikelihoods,
    opts: &'a DecodeOptions,
    store: TokenStore<G::State>,
    stats: DecodeStats,
}

impl<'a, G: Grammar> Sync<'a, G> {
    fn new(graph: &'a Wfst, grammar: &'a G, ll: &'a LogLikelihoods, opts: &'a DecodeOptions) -> Self {
        Sync {
            graph,
            grammar,
            ll,
            opts,
            store: TokenStore::new(),
            stats: DecodeStats::default(),
        }
    }

    fn init(&mut self) -> Result<TokenId, DecodeError> {
        let start_state = self.graph.start().ok_or(DecodeError::EmptyGraph)?;
        self.store.push_frame();
        let (start, _) = self.store.relax(
            0,
            start_state,
            self.grammar.start(),
            DualCost::one(),
            Status::Expanded,
        );
        self.process_nonemitting(0, self.opts.beam)?;
        Ok(start)
    }

    /// Expands emitting arcs of frame `t` into frame `t + 1`; returns the
    /// cutoff for the new frame.
    fn process_emitting(&mut self, t: usize) -> Result<f64, DecodeError> {
        let mut sources: Vec<TokenId> = self.store.frame(t).to_vec();
        let mut costs: Vec<f64> = sources
            .iter()
            .map(|&id| self.store.token(id).cost.total())
            .collect();
        let cut = cutoff(&mut costs, self.opts.beam, self.opts.max_active);
        sources.retain(|&id| self.store.token(id).cost.total() <= cut);
        sources.sort_by(|&a, &b| {
            let (x, y) = (self.store.token(a), self.store.token(b));
            x.cost
                .cmp_cost(&y.cost)
                .then_with(|| (x.hclg, x.lm).cmp(&(y.hclg, y.lm)))
        });
        self.store.push_frame();
        let scale = self.opts.acoustic_scale;
        let mut next_cutoff = f64::INFINITY;
        for src in sources {
            let (hclg, lm, cost) = {
                let t = self.store.token(src);
                (t.hclg, t.lm, t.cost)
            };
            for arc in self.graph.arcs(hclg) {
                if arc.ilabel == EPSILON {
                    continue;
                }
                let ac = self.ll.cost(t, arc.ilabel, scale);
                let (next_lm, res) = if arc.olabel == EPSILON {
                    (lm, 0.0)
                } else {
                    self.grammar.step(lm, arc.olabel)?
                };
                let graph_cost = arc.weight.graph + res;
                let new_cost = cost.times(DualCost::new(graph_cost, arc.weight.acoustic + ac));
                let total = new_cost.total();
                if !(total <= next_cutoff) {
                    continue;
                }
                if total + self.opts.beam < next_cutoff {
                    next_cutoff = total + self.opts.beam;
                }
                let (dest, outcome) =
                    self.store
                        .relax(t + 1, arc.nextstate, next_lm, new_cost, Status::Expanded);
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
            self.store.token_mut(src).emitted = true;
        }
        Ok(next_cutoff)
    }

    /// Input-epsilon closure of `frame` in topological order.
    fn process_nonemitting(&mut self, frame: usize, cut: f64) -> Result<(), DecodeError> {
        let mut heap: BinaryHeap<Reverse<(u32, StateId, G::State, TokenId)>> = self
            .store
            .frame(frame)
            .iter()
            .map(|&id| {
                let t = self.store.token(id);
                Reverse((self.graph.eps_rank(t.hclg), t.hclg, t.lm, id))
            })
            .collect();
        let mut queued: std::collections::HashSet<TokenId> =
            self.store.frame(frame).iter().copied().collect();
        while let Some(Reverse((_, hclg, lm, src))) = heap.pop() {
            let cost = self.store.token(src).cost;
            if !(cost.total() <= cut) {
                continue;
            }
            for arc in self.graph.arcs(hclg) {
                if arc.ilabel != EPSILON {
                    break;
                }
                let (next_lm, res) = if arc.olabel == EPSILON {
                    (lm, 0.0)
                } else {
                    self.grammar.step(lm, arc.olabel)?
                };
                let graph_cost = arc.weight.graph + res;
                let new_cost = cost.times(DualCost::new(graph_cost, arc.weight.acoustic));
                if !(new_cost.total() <= cut) {
                    continue;
                }
                let (dest, outcome) =
                    self.store
                        .relax(frame, arc.nextstate, next_lm, new_cost, Status::Expanded);
                if outcome.effective() {
                    self.stats.propagations += 1;
                }
                self.store.add_link(
                    src,
                    ForwardLink {
                        dest,
                        ilabel: EPSILON,
                        olabel: arc.olabel,
                        hclg_graph: arc.weight.graph,
                        graph: graph_cost,
                        acoustic: arc.weight.acoustic,
                    },
                );
                if queued.insert(dest) {
                    heap.push(Reverse((
                        self.graph.eps_rank(arc.nextstate),
                        arc.nextstate,
                        next_lm,
                        dest,
                    )));
                }
            }
        }
        Ok(())
    }
}
