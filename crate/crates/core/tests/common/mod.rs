#![allow(dead_code)]

pub mod arpa;

use asyncdec::am::LogLikelihoods;
use asyncdec::decoder::Lattice;
use asyncdec::fst::{compose_static, enumerate_paths, Label};
use asyncdec::lm::ResidualGrammar;
use asyncdec::synth::{frames_to_wfst, random_loglikes, tiny_setup, Setup};

/// `(total cost, emitted labels, words)` of one path.
pub type FlatPath = (f64, Vec<Label>, Vec<Label>);

pub struct Case {
    pub setup: Setup,
    pub ll: LogLikelihoods,
    /// Every alignment of the frames through the graph, rescored with the
    /// residual grammar; sorted.
    pub oracle: Vec<FlatPath>,
    /// Same, without the residual.
    pub oracle_small: Vec<FlatPath>,
}

pub fn sort_paths(mut v: Vec<FlatPath>) -> Vec<FlatPath> {
    v.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)).then(a.0.total_cmp(&b.0)));
    v
}

pub fn lattice_paths(lat: &Lattice) -> Vec<FlatPath> {
    sort_paths(
        enumerate_paths(&lat.fst, 1_000_000)
            .unwrap()
            .into_iter()
            .map(|p| (p.cost.total(), p.emitted(), p.words()))
            .collect(),
    )
}

pub fn same_paths(a: &[FlatPath], b: &[FlatPath], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.1 == y.1 && x.2 == y.2 && (x.0 - y.0).abs() <= tol)
}

pub fn best(paths: &[FlatPath]) -> f64 {
    paths.iter().map(|p| p.0).fold(f64::INFINITY, f64::min)
}

fn rescore(r: &ResidualGrammar, words: &[Label]) -> f64 {
    r.sentence_cost(words).unwrap()
}

/// Tiny fixtures whose full alignment set stays enumerable.
pub fn cases(count: usize, seed: u64, small_order: usize, large_order: usize) -> Vec<Case> {
    let mut out = Vec::new();
    let mut s = seed;
    while out.len() < count {
        s += 1;
        let setup = tiny_setup(s, small_order, large_order).unwrap();
        if setup.hclg.num_states() > 50 {
            continue;
        }
        let frames = 3 + (s % 6) as usize;
        let ll = random_loglikes(frames, setup.hclg.max_ilabel() as usize, 3.0, s);
        let u = frames_to_wfst(&ll, 1.0);
        let Ok(paths) = enumerate_paths(&compose_static(&u, &setup.hclg), 20_000) else {
            continue;
        };
        if paths.is_empty() {
            continue;
        }
        let r = setup.big.residual.clone();
        let oracle_small: Vec<FlatPath> = paths
            .iter()
            .map(|p| (p.cost.total(), p.emitted(), p.words()))
            .collect();
        let oracle = oracle_small
            .iter()
            .map(|(c, e, w)| (c + rescore(&r, w), e.clone(), w.clone()))
            .collect();
        out.push(Case {
            setup,
            ll,
            oracle: sort_paths(oracle),
            oracle_small: sort_paths(oracle_small),
        });
    }
    out
}
