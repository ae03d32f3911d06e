//! Lattice rescoring and evaluation metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::decoder::{best_path, Lattice};
use crate::fst::{Arc, FstError, StateId, WfstBuilder, EPSILON};
use crate::lm::{FState, LmError, ResidualGrammar};
use crate::semiring::DualCost;

/// Composes a lattice on demand with a residual grammar over its output
/// labels, adding residual costs to the graph component.
///
/// Every composed state is co-accessible because the grammar accepts every
/// word, so no trimming is needed.
pub fn rescore_lattice(lat: &Lattice, f: &ResidualGrammar) -> Result<Lattice, LmError> {
    let Some(start) = lat.fst.start() else {
        return Ok(lat.clone());
    };
    let mut b = WfstBuilder::new();
    let mut ids: HashMap<(StateId, FState), StateId> = HashMap::new();
    let mut queue: Vec<(StateId, FState)> = Vec::new();
    let mut frames = Vec::new();
    let mut intern = |key: (StateId, FState), b: &mut WfstBuilder, queue: &mut Vec<_>, frames: &mut Vec<usize>| {
        *ids.entry(key).or_insert_with(|| {
            queue.push(key);
            frames.push(lat.frames[key.0]);
            b.add_state()
        })
    };
    let s0 = intern((start, f.start()), &mut b, &mut queue, &mut frames);
    b.set_start(s0);
    let mut head = 0;
    while head < queue.len() {
        let key @ (s, fs) = queue[head];
        head += 1;
        let src = intern(key, &mut b, &mut queue, &mut frames);
        if let Some(w) = lat.fst.final_weight(s) {
            b.set_final(src, DualCost::new(w.graph + f.final_cost(fs), w.acoustic));
        }
        for a in lat.fst.arcs(s) {
            let (next, res) = if a.olabel == EPSILON {
                (fs, 0.0)
            } else {
                f.step(fs, a.olabel)?
            };
            let dst = intern((a.nextstate, next), &mut b, &mut queue, &mut frames);
            let w = DualCost::new(a.weight.graph + res, a.weight.acoustic);
            b.add_arc(src, Arc::new(a.ilabel, a.olabel, w, dst));
        }
    }
    let fst = b.build().expect("rescoring keeps the lattice acyclic");
    Ok(Lattice {
        fst,
        frames,
        num_frames: lat.num_frames,
    })
}

/// Negated best-path cost per frame.
pub fn avg_loglike(lat: &Lattice, frames: usize) -> Result<f64, FstError> {
    let p = best_path(lat)?;
    if frames == 0 {
        return Err(FstError::NoPath);
    }
    Ok(-p.cost.total() / frames as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    Match(usize, usize),
    Sub(usize, usize),
    Del(usize),
    Ins(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WerResult {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    pub percent: f64,
    /// Empty reference with a non-empty hypothesis.
    pub degenerate: bool,
    pub alignment: Vec<EditOp>,
}

impl WerResult {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Levenshtein alignment with unit costs. On equal cost the backtrace takes
/// the diagonal first, so substitutions win over deletion/insertion pairs.
pub fn wer<T: PartialEq>(reference: &[T], hyp: &[T]) -> WerResult {
    let (n, m) = (reference.len(), hyp.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[i - 1][j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            d[i][j] = diag.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let (mut i, mut j) = (n, m);
    let mut ops = Vec::new();
    let (mut s, mut del, mut ins) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                if same {
                    ops.push(EditOp::Match(i - 1, j - 1));
                } else {
                    ops.push(EditOp::Sub(i - 1, j - 1));
                    s += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(EditOp::Del(i - 1));
            del += 1;
            i -= 1;
        } else {
            ops.push(EditOp::Ins(j - 1));
            ins += 1;
            j -= 1;
        }
    }
    ops.reverse();
    let (percent, degenerate) = if n == 0 {
        if m == 0 {
            (0.0, false)
        } else {
            (100.0 * m as f64, true)
        }
    } else {
        (100.0 * (s + del + ins) as f64 / n as f64, false)
    };
    WerResult {
        substitutions: s,
        deletions: del,
        insertions: ins,
        ref_len: n,
        percent,
        degenerate,
        alignment: ops,
    }
}

/// Two-line aligned text dump (`REF:` / `HYP:`), `*` marking gaps.
pub fn format_alignment<T: AsRef<str>>(reference: &[T], hyp: &[T], ops: &[EditOp]) -> String {
    let mut r = Vec::new();
    let mut h = Vec::new();
    for op in ops {
        let (a, b) = match *op {
            EditOp::Match(i, j) => (reference[i].as_ref().to_string(), hyp[j].as_ref().to_string()),
            EditOp::Sub(i, j) => (
                reference[i].as_ref().to_uppercase(),
                hyp[j].as_ref().to_uppercase(),
            ),
            EditOp::Del(i) => (reference[i].as_ref().to_uppercase(), "*".to_string()),
            EditOp::Ins(j) => ("*".to_string(), hyp[j].as_ref().to_uppercase()),
        };
        let w = a.chars().count().max(b.chars().count());
        r.push(format!("{a:<w$}"));
        h.push(format!("{b:<w$}"));
    }
    format!("REF: {}\nHYP: {}\n", r.join(" "), h.join(" "))
}
