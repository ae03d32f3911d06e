mod common;

use asyncdec::am::LogLikelihoods;
use asyncdec::decoder::{
    best_path, decode, decode_async, decode_biglm, AsyncOptions, DecodeOptions, TokenStore,
};
use asyncdec::eval::rescore_lattice;
use asyncdec::fst::read_text_fst;
use asyncdec::synth::flip_setup;
use common::*;

fn exhaustive_async(offset: usize) -> AsyncOptions {
    AsyncOptions {
        offset,
        backfill_beam: f64::INFINITY,
        ..AsyncOptions::from_decode(DecodeOptions::exhaustive())
    }
}

#[test]
fn single_arc_graph() {
    let g = read_text_fst("0 1 1 1 0.5\n1 0\n", false).unwrap();
    let ll = LogLikelihoods::new(1, 1, vec![-1.2]).unwrap();
    let (lat, stats) = decode(&g, &ll, &DecodeOptions::default()).unwrap();
    let p = best_path(&lat).unwrap();
    assert!((p.cost.total() - 1.7).abs() < 1e-12);
    assert_eq!(lattice_paths(&lat).len(), 1);
    assert_eq!(stats.propagations, 1);
}

#[test]
fn baseline_lattice_equals_oracle() {
    for case in cases(12, 100, 2, 3) {
        let (lat, _) = decode(&case.setup.hclg, &case.ll, &DecodeOptions::exhaustive()).unwrap();
        let got = lattice_paths(&lat);
        assert!(same_paths(&got, &case.oracle_small, 1e-9));
        let p = best_path(&lat).unwrap();
        assert!((p.cost.total() - best(&case.oracle_small)).abs() < 1e-9);
    }
}

#[test]
fn biglm_and_async_lattices_equal_oracle() {
    for case in cases(12, 200, 1, 3) {
        let (lat, _) = decode_biglm(&case.setup.big, &case.ll, &DecodeOptions::exhaustive()).unwrap();
        assert!(same_paths(&lattice_paths(&lat), &case.oracle, 1e-9));
        let reference = best_path(&lat).unwrap();
        for offset in [1, 3, 5] {
            let (alat, _) = decode_async(&case.setup.big, &case.ll, &exhaustive_async(offset)).unwrap();
            assert!(same_paths(&lattice_paths(&alat), &case.oracle, 1e-9), "offset {offset}");
            assert_eq!(best_path(&alat).unwrap(), reference);
        }
    }
}

#[test]
fn identity_residual_matches_baseline() {
    for case in cases(10, 300, 1, 2) {
        let id = case.setup.identity().unwrap();
        let opts = DecodeOptions::default();
        let (base, bs) = decode(&id.hclg, &case.ll, &opts).unwrap();
        let (big, gs) = decode_biglm(&id.big, &case.ll, &opts).unwrap();
        assert_eq!(best_path(&base).unwrap(), best_path(&big).unwrap());
        assert_eq!(bs.propagations, gs.propagations);
        assert_eq!(bs.tokens_per_frame, gs.tokens_per_frame);
        let (asy, _) = decode_async(&id.big, &case.ll, &AsyncOptions::default()).unwrap();
        assert!(same_paths(&lattice_paths(&asy), &lattice_paths(&base), 1e-9));
    }
}

#[test]
fn rescoring_full_lattice_equals_biglm() {
    for case in cases(8, 400, 2, 3) {
        let opts = DecodeOptions::exhaustive();
        let (lat, _) = decode(&case.setup.hclg, &case.ll, &opts).unwrap();
        let rescored = rescore_lattice(&lat, &case.setup.big.residual).unwrap();
        let (big, _) = decode_biglm(&case.setup.big, &case.ll, &opts).unwrap();
        let (a, b) = (best_path(&rescored).unwrap(), best_path(&big).unwrap());
        assert!((a.cost.total() - b.cost.total()).abs() < 1e-9);
        assert_eq!(lattice_paths(&rescored).len(), lattice_paths(&lat).len());
    }
}

#[test]
fn flip_fixture_prefers_large_lm() {
    let (setup, ll, reference) = flip_setup().unwrap();
    let opts = DecodeOptions {
        beam: 6.0,
        ..DecodeOptions::default()
    };
    let (base, _) = decode(&setup.hclg, &ll, &opts).unwrap();
    let (big, _) = decode_biglm(&setup.big, &ll, &opts).unwrap();
    assert_eq!(setup.spell(&best_path(&big).unwrap().words), reference);
    assert_ne!(setup.spell(&best_path(&base).unwrap().words), reference);
    let rescored = rescore_lattice(&base, &setup.big.residual).unwrap();
    assert_ne!(setup.spell(&best_path(&rescored).unwrap().words), reference);
}

#[test]
fn pruning_is_deterministic_and_idempotent() {
    for case in cases(5, 500, 1, 2) {
        let opts = DecodeOptions {
            prune_interval: 2,
            lattice_beam: 2.0,
            ..DecodeOptions::default()
        };
        let (a, sa) = decode_biglm(&case.setup.big, &case.ll, &opts).unwrap();
        let (b, sb) = decode_biglm(&case.setup.big, &case.ll, &opts).unwrap();
        assert_eq!(lattice_paths(&a), lattice_paths(&b));
        assert_eq!(sa.propagations, sb.propagations);
        let best_total = best_path(&a).unwrap().cost.total();
        for p in lattice_paths(&a) {
            assert!(p.0 >= best_total - 1e-9);
        }
    }
    let mut store: TokenStore<()> = TokenStore::new();
    let g = read_text_fst("0 1 1 1\n1\n", false).unwrap();
    store.push_frame();
    assert_eq!(store.prune_active_tokens(&g, 8.0), 0);
}

#[test]
fn beam_monotonicity() {
    for case in cases(6, 600, 1, 3) {
        let mut last = f64::INFINITY;
        for beam in [2.0, 4.0, 8.0, f64::INFINITY] {
            let opts = DecodeOptions {
                beam,
                ..DecodeOptions::default()
            };
            if let Ok((lat, _)) = decode_biglm(&case.setup.big, &case.ll, &opts) {
                let c = best_path(&lat).unwrap().cost.total();
                assert!(c <= last + 1e-9);
                last = c;
            }
        }
    }
}
