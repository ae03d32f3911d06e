use std::collections::HashMap;

use super::wfst::{connect, Arc, StateId, Wfst, WfstBuilder, EPSILON};

/// Composition filter state.
///
/// Between two matched moves, epsilon moves of the left operand (output
/// epsilon) come first and epsilon moves of the right operand (input epsilon)
/// after; once the right operand has moved alone the left one may not until
/// the next matched move. Each epsilon interleaving therefore appears once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Filter {
    Open,
    RightMoved,
}

/// Static composition `a ∘ b`, trimmed.
pub fn compose_static(a: &Wfst, b: &Wfst) -> Wfst {
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Wfst::empty();
    };
    let mut out = WfstBuilder::new();
    let mut ids: HashMap<(StateId, StateId, Filter), StateId> = HashMap::new();
    let mut queue: Vec<(StateId, StateId, Filter)> = Vec::new();

    let mut intern = |key: (StateId, StateId, Filter),
                      out: &mut WfstBuilder,
                      queue: &mut Vec<(StateId, StateId, Filter)>| {
        *ids.entry(key).or_insert_with(|| {
            queue.push(key);
            out.add_state()
        })
    };

    let start = intern((sa, sb, Filter::Open), &mut out, &mut queue);
    out.set_start(start);
    let mut head = 0;
    while head < queue.len() {
        let key @ (qa, qb, filter) = queue[head];
        head += 1;
        let src = intern(key, &mut out, &mut queue);

        if let (Some(fa), Some(fb)) = (a.final_weight(qa), b.final_weight(qb)) {
            out.set_final(src, fa.times(fb));
        }

        for arc_a in a.arcs(qa) {
            if arc_a.olabel == EPSILON {
                if filter == Filter::Open {
                    let dst = intern((arc_a.nextstate, qb, Filter::Open), &mut out, &mut queue);
                    out.add_arc(src, Arc::new(arc_a.ilabel, EPSILON, arc_a.weight, dst));
                }
                continue;
            }
            // b's arcs are ilabel-sorted.
            let arcs_b = b.arcs(qb);
            let lo = arcs_b.partition_point(|x| x.ilabel < arc_a.olabel);
            for arc_b in arcs_b[lo..]
                .iter()
                .take_while(|x| x.ilabel == arc_a.olabel)
            {
                let dst = intern(
                    (arc_a.nextstate, arc_b.nextstate, Filter::Open),
                    &mut out,
                    &mut queue,
                );
                out.add_arc(
                    src,
                    Arc::new(
                        arc_a.ilabel,
                        arc_b.olabel,
                        arc_a.weight.times(arc_b.weight),
                        dst,
                    ),
                );
            }
        }
        for arc_b in b.arcs(qb).iter().take_while(|x| x.ilabel == EPSILON) {
            let dst = intern(
                (qa, arc_b.nextstate, Filter::RightMoved),
                &mut out,
                &mut queue,
            );
            out.add_arc(src, Arc::new(EPSILON, arc_b.olabel, arc_b.weight, dst));
        }
    }
    let built = out
        .build()
        .expect("composition of epsilon-acyclic operands is epsilon-acyclic");
    connect(&built)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fst::{enumerate_paths, shortest_path, Path};
    use crate::semiring::DualCost;

    fn fst(text: &str) -> Wfst {
        crate::fst::read_text_fst(text, false).unwrap()
    }

    /// Universal one-state acceptor over `labels` with free weights.
    fn universal(labels: &[u32]) -> Wfst {
        let mut b = WfstBuilder::new();
        b.add_state();
        b.set_start(0);
        b.set_final(0, DualCost::one());
        for &l in labels {
            b.add_arc(0, Arc::new(l, l, DualCost::one(), 0));
        }
        b.build().unwrap()
    }

    #[test]
    fn identity_right_operand() {
        let a = fst("0 1 1 2 0.5\n1 2 3 0 1.0\n1 2 2 4 2.0\n2 0.25\n");
        let c = compose_static(&a, &universal(&a.output_labels()));
        let sa = shortest_path(&a).unwrap();
        let sc = shortest_path(&c).unwrap();
        assert_eq!(sa.cost, sc.cost);
        assert_eq!(sa.olabels, sc.olabels);
    }

    #[test]
    fn empty_annihilates() {
        let a = fst("0 1 1 2 0.5\n1\n");
        assert!(compose_static(&a, &Wfst::empty()).is_empty());
        assert!(compose_static(&Wfst::empty(), &a).is_empty());
    }

    /// Joins path enumerations of both operands on the middle label sequence.
    fn brute_force(a: &Wfst, b: &Wfst) -> Vec<(f64, Vec<u32>, Vec<u32>)> {
        let pa = enumerate_paths(a, 10_000).unwrap();
        let pb = enumerate_paths(b, 10_000).unwrap();
        let mut out = Vec::new();
        for x in &pa {
            for y in &pb {
                if x.words() == y.emitted() {
                    out.push((x.cost.times(y.cost).total(), x.emitted(), y.words()));
                }
            }
        }
        normalize(out)
    }

    fn normalize(mut v: Vec<(f64, Vec<u32>, Vec<u32>)>) -> Vec<(f64, Vec<u32>, Vec<u32>)> {
        v.sort_by(|a, b| {
            a.1.cmp(&b.1)
                .then(a.2.cmp(&b.2))
                .then(a.0.total_cmp(&b.0))
        });
        v
    }

    fn flatten(paths: &[Path]) -> Vec<(f64, Vec<u32>, Vec<u32>)> {
        normalize(
            paths
                .iter()
                .map(|p| (p.cost.total(), p.emitted(), p.words()))
                .collect(),
        )
    }

    fn assert_same(x: &[(f64, Vec<u32>, Vec<u32>)], y: &[(f64, Vec<u32>, Vec<u32>)]) {
        assert_eq!(x.len(), y.len(), "{x:?}\n{y:?}");
        for (p, q) in x.iter().zip(y) {
            assert_eq!((&p.1, &p.2), (&q.1, &q.2));
            assert!((p.0 - q.0).abs() < 1e-9);
        }
    }

    #[test]
    fn three_state_fixtures_match_brute_force() {
        // Left: output epsilons and a branch.
        let a = fst("0 1 1 5 0.5\n0 1 2 0 0.25\n1 2 3 6 1.0\n1 2 4 0 0.75,0.5\n2 0.1\n");
        // Right: input epsilon and a relabelling.
        let b = fst("0 1 5 7 0.3\n0 1 0 9 0.6\n1 2 6 8 0.2\n1 2 0 0 1.1\n2 0\n");
        let c = compose_static(&a, &b);
        assert_same(&flatten(&enumerate_paths(&c, 10_000).unwrap()), &brute_force(&a, &b));
    }

    #[test]
    fn associative_on_path_multisets() {
        let a = fst("0 1 1 1 0.5\n0 1 2 0 0.25\n1 2 0 2 1.0\n2\n");
        let b = fst("0 1 1 3 0.1\n0 1 0 4 0.2\n1 2 2 5 0.3\n1 2 0 0 0.4\n2\n");
        let c = fst("0 0 3 6 0.5\n0 0 4 0 0.5\n0 0 5 7 0.5\n0 1 0 8 1.5\n1\n0\n");
        let left = compose_static(&compose_static(&a, &b), &c);
        let right = compose_static(&a, &compose_static(&b, &c));
        assert_same(
            &flatten(&enumerate_paths(&left, 10_000).unwrap()),
            &flatten(&enumerate_paths(&right, 10_000).unwrap()),
        );
    }
}
