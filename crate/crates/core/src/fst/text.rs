//! AT&T / OpenFST text format with an optional `graph,acoustic` weight form.
//!
//! Arc lines are `src dst ilabel olabel [weight]` (or `src dst label [weight]`
//! for acceptors); final lines are `state [weight]`. A weight is either a
//! single number (graph cost) or `g,a`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::semiring::DualCost;

use super::wfst::{Arc, Label, StateId, Wfst, WfstBuilder};
use super::{FstError, Result};

pub fn parse_weight(field: &str) -> Option<DualCost> {
    let parse = |s: &str| -> Option<f64> {
        let v: f64 = s.trim().parse().ok()?;
        (!v.is_nan()).then_some(v)
    };
    match field.split_once(',') {
        Some((g, a)) => Some(DualCost::new(parse(g)?, parse(a)?)),
        None => Some(DualCost::graph_only(parse(field)?)),
    }
}

/// Parses a text FST; the source state of the first line is the start state.
pub fn read_text_fst(text: &str, acceptor: bool) -> Result<Wfst> {
    let arc_fields = if acceptor { 3 } else { 4 };
    let mut b = WfstBuilder::new();
    let mut defined: HashSet<StateId> = HashSet::new();
    let mut targets: Vec<(StateId, usize)> = Vec::new();
    let mut start = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| FstError::Parse { line: lineno, msg };
        let state = |f: &str| -> Result<StateId> {
            f.parse::<StateId>()
                .map_err(|_| err(format!("bad state id {f:?}")))
        };
        let label = |f: &str| -> Result<Label> {
            f.parse::<Label>()
                .map_err(|_| err(format!("bad label {f:?}")))
        };
        let weight = |f: &str| -> Result<DualCost> {
            parse_weight(f).ok_or_else(|| err(format!("bad weight {f:?}")))
        };

        let n = fields.len();
        if n == 1 || n == 2 {
            let s = state(fields[0])?;
            let w = if n == 2 {
                weight(fields[1])?
            } else {
                DualCost::one()
            };
            b.ensure_state(s);
            start.get_or_insert(s);
            defined.insert(s);
            if !w.is_zero() {
                b.set_final(s, w);
            }
        } else if n == arc_fields || n == arc_fields + 1 {
            let src = state(fields[0])?;
            let dst = state(fields[1])?;
            let ilabel = label(fields[2])?;
            let olabel = if acceptor {
                ilabel
            } else {
                label(fields[3])?
            };
            let w = if n == arc_fields + 1 {
                weight(fields[arc_fields])?
            } else {
                DualCost::one()
            };
            b.ensure_state(src.max(dst));
            start.get_or_insert(src);
            defined.insert(src);
            targets.push((dst, lineno));
            b.add_arc(src, Arc::new(ilabel, olabel, w, dst));
        } else {
            return Err(err(format!("unexpected field count {n}")));
        }
    }

    if let Some(&(s, line)) = targets.iter().find(|(s, _)| !defined.contains(s)) {
        return Err(FstError::Parse {
            line,
            msg: format!("dangling state {s}: referenced but never defined"),
        });
    }
    if let Some(s) = start {
        b.set_start(s);
    }
    b.build()
}

/// Writes `fst` so that the start state's line comes first.
pub fn write_text_fst(fst: &Wfst, acceptor: bool) -> String {
    let mut out = String::new();
    let Some(start) = fst.start() else {
        return out;
    };
    let order = std::iter::once(start).chain(fst.states().filter(|&s| s != start));
    for s in order {
        for a in fst.arcs(s) {
            if acceptor {
                let _ = write!(out, "{}\t{}\t{}", s, a.nextstate, a.ilabel);
            } else {
                let _ = write!(out, "{}\t{}\t{}\t{}", s, a.nextstate, a.ilabel, a.olabel);
            }
            if a.weight != DualCost::one() {
                let _ = write!(out, "\t{}", a.weight);
            }
            out.push('\n');
        }
        if let Some(w) = fst.final_weight(s) {
            if w == DualCost::one() {
                let _ = writeln!(out, "{s}");
            } else {
                let _ = writeln!(out, "{s}\t{w}");
            }
        }
        if fst.arcs(s).is_empty() && !fst.is_final(s) {
            // Dead-end state: an infinite final weight keeps it defined.
            let _ = writeln!(out, "{s}\tInfinity");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::shortest_path;

    #[test]
    fn minimal_input() {
        let f = read_text_fst("0 1 1 1 0.5\n1 0\n", false).unwrap();
        assert_eq!(f.num_states(), 2);
        assert_eq!(f.num_arcs(), 1);
        assert_eq!(f.final_weight(1), Some(DualCost::one()));
        assert_eq!(f.arcs(0)[0].weight, DualCost::graph_only(0.5));
    }

    #[test]
    fn epsilon_self_loop_is_rejected() {
        let err = read_text_fst("0 0 0 0 0.0\n", false).unwrap_err();
        assert!(matches!(err, FstError::EpsilonCycle(0)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read_text_fst("0 1 1 1\n1 x 2 2\n", false).unwrap_err();
        assert!(matches!(err, FstError::Parse { line: 2, .. }), "{err:?}");
        let err = read_text_fst("0 1 1 1 0.5,zz\n1\n", false).unwrap_err();
        assert!(matches!(err, FstError::Parse { line: 1, .. }));
    }

    #[test]
    fn dangling_target_rejected() {
        let err = read_text_fst("0 1 1 1\n0\n", false).unwrap_err();
        assert!(matches!(err, FstError::Parse { line: 1, .. }));
    }

    #[test]
    fn dual_weight_fixture_shortest_path() {
        // Paths (by hand): 0-1-3: 0.5+1.5 + 1 + 0.25 = 3.25 ; 0-2-3: 1 + 2 + 0.25 = 3.25
        // 0-1-2-3: 2.0 + 0.1 + 2 + 0.25 = 4.35 ; final at 1: 2.0 + 3.0 = 5.0
        // Tie at 3.25 broken by graph cost: 0-1-3 has graph 0.5+1+0.25 = 1.75,
        // 0-2-3 has graph 1+2+0.25 = 3.25.
        let text = "0 1 1 1 0.5,1.5\n0 2 2 2 1.0\n1 3 3 3 1.0\n1 2 4 4 0.1\n2 3 5 5 2.0\n3 0.25\n1 3.0\n";
        let f = read_text_fst(text, false).unwrap();
        let best = shortest_path(&f).unwrap();
        assert!((best.cost.total() - 3.25).abs() < 1e-9);
        assert_eq!(best.olabels, vec![1, 3]);
    }

    #[test]
    fn acceptor_format() {
        let f = read_text_fst("0 1 7 0.5\n1\n", true).unwrap();
        assert_eq!(f.arcs(0)[0].olabel, 7);
        let back = read_text_fst(&write_text_fst(&f, true), true).unwrap();
        assert_eq!(back.arcs(0), f.arcs(0));
    }
}
