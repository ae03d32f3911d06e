use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::semiring::DualCost;

use super::wfst::{coaccessible, Label, StateId, Wfst, EPSILON};
use super::{FstError, Result};

/// One accepting path.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub cost: DualCost,
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub states: Vec<StateId>,
}

impl Path {
    /// Output labels with epsilons removed.
    pub fn words(&self) -> Vec<Label> {
        self.olabels
            .iter()
            .copied()
            .filter(|&l| l != EPSILON)
            .collect()
    }

    /// Input labels with epsilons removed.
    pub fn emitted(&self) -> Vec<Label> {
        self.ilabels
            .iter()
            .copied()
            .filter(|&l| l != EPSILON)
            .collect()
    }
}

/// Best cost from each state to a final state (`DualCost::zero()` if none).
///
/// Label-correcting relaxation, so negative arc costs are fine; a negative
/// cycle reachable from a final state is reported as an error.
pub fn distance_to_final(fst: &Wfst) -> Result<Vec<DualCost>> {
    let n = fst.num_states();
    let mut reverse: Vec<Vec<(StateId, DualCost)>> = vec![Vec::new(); n];
    for s in fst.states() {
        for a in fst.arcs(s) {
            reverse[a.nextstate].push((s, a.weight));
        }
    }
    let mut dist = vec![DualCost::zero(); n];
    let mut queued = vec![false; n];
    let mut updates = vec![0usize; n];
    let mut queue = VecDeque::new();
    for s in fst.states() {
        if let Some(w) = fst.final_weight(s) {
            dist[s] = w;
            queued[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        queued[s] = false;
        for &(p, w) in &reverse[s] {
            let cand = w.times(dist[s]);
            if cand.better_than(&dist[p]) {
                dist[p] = cand;
                updates[p] += 1;
                if updates[p] > n + 1 {
                    return Err(FstError::NegativeCycle);
                }
                if !queued[p] {
                    queued[p] = true;
                    queue.push_back(p);
                }
            }
        }
    }
    Ok(dist)
}

/// Minimum-cost accepting path.
///
/// Ties under the [`DualCost`] order go to the lexicographically smallest state
/// sequence.
pub fn shortest_path(fst: &Wfst) -> Result<Path> {
    let start = fst.start().ok_or(FstError::NoPath)?;
    let dist = distance_to_final(fst)?;
    if dist[start].is_zero() {
        return Err(FstError::NoPath);
    }
    let mut path = Path {
        cost: DualCost::one(),
        ilabels: Vec::new(),
        olabels: Vec::new(),
        states: vec![start],
    };
    let mut s = start;
    let limit = fst.num_states() * 4 + 4;
    loop {
        // Stopping here is the shortest (hence smallest) continuation.
        let mut best: Option<(DualCost, Option<usize>)> =
            fst.final_weight(s).map(|w| (w, None));
        for (i, a) in fst.arcs(s).iter().enumerate() {
            let cand = a.weight.times(dist[a.nextstate]);
            if cand.is_zero() {
                continue;
            }
            let replace = match &best {
                None => true,
                Some((c, choice)) => match cand.cmp_cost(c) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => match choice {
                        None => false,
                        Some(j) => a.nextstate < fst.arcs(s)[*j].nextstate,
                    },
                },
            };
            if replace {
                best = Some((cand, Some(i)));
            }
        }
        match best {
            Some((w, None)) => {
                path.cost = path.cost.times(w);
                return Ok(path);
            }
            Some((_, Some(i))) => {
                let a = fst.arcs(s)[i];
                path.cost = path.cost.times(a.weight);
                path.ilabels.push(a.ilabel);
                path.olabels.push(a.olabel);
                path.states.push(a.nextstate);
                s = a.nextstate;
                if path.states.len() > limit {
                    return Err(FstError::NegativeCycle);
                }
            }
            None => return Err(FstError::NoPath),
        }
    }
}

/// All accepting paths, sorted ascending by cost (then labels).
///
/// Fails with [`FstError::Capacity`] once more than `max_paths` paths exist or
/// the search exceeds a proportional step budget (cyclic inputs).
pub fn enumerate_paths(fst: &Wfst, max_paths: usize) -> Result<Vec<Path>> {
    let Some(start) = fst.start() else {
        return Ok(Vec::new());
    };
    let live = coaccessible(fst);
    if !live[start] {
        return Ok(Vec::new());
    }
    let budget = max_paths
        .saturating_mul(fst.num_states() + 1)
        .saturating_add(1024);
    let mut steps = 0usize;
    let mut out = Vec::new();
    let mut cur = Path {
        cost: DualCost::one(),
        ilabels: Vec::new(),
        olabels: Vec::new(),
        states: vec![start],
    };
    // Stack frames: (state, next arc index, cost before entering state).
    let mut stack: Vec<(StateId, usize, DualCost)> = vec![(start, 0, DualCost::one())];
    let mut entered = true;
    while let Some(&mut (s, ref mut next, _)) = stack.last_mut() {
        if entered {
            entered = false;
            if let Some(w) = fst.final_weight(s) {
                if out.len() == max_paths {
                    return Err(FstError::Capacity(max_paths));
                }
                let mut p = cur.clone();
                p.cost = cur.cost.times(w);
                out.push(p);
            }
        }
        steps += 1;
        if steps > budget {
            return Err(FstError::Capacity(max_paths));
        }
        if *next < fst.arcs(s).len() {
            let a = fst.arcs(s)[*next];
            *next += 1;
            if !live[a.nextstate] {
                continue;
            }
            stack.push((a.nextstate, 0, cur.cost));
            cur.cost = cur.cost.times(a.weight);
            cur.ilabels.push(a.ilabel);
            cur.olabels.push(a.olabel);
            cur.states.push(a.nextstate);
            entered = true;
        } else {
            let (_, _, before) = stack.pop().expect("non-empty");
            cur.cost = before;
            if !stack.is_empty() {
                cur.ilabels.pop();
                cur.olabels.pop();
                cur.states.pop();
            }
        }
    }
    out.sort_by(|a, b| {
        a.cost
            .cmp_cost(&b.cost)
            .then_with(|| a.olabels.cmp(&b.olabels))
            .then_with(|| a.ilabels.cmp(&b.ilabels))
    });
    Ok(out)
}
