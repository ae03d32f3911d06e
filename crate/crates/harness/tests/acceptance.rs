//! Acceptance suite. Runs every criterion twice, prints one line per
//! criterion and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use asyncdec::am::synthesize_loglikes;
use asyncdec::decoder::{best_path, decode, decode_async, decode_biglm, AsyncOptions, DecodeOptions};
use asyncdec::eval::{rescore_lattice, wer};
use asyncdec::lm::BackoffLm;
use asyncdec::synth::{corpus_setup, flip_setup, tiny_setup, Setup};
use asyncdec_harness::{compare_reports, decode_corpus, Corpus, ExperimentConfig, Inputs, Mode, Totals, Utterance};
use common::arpa::ArpaOracle;
use common::{best, cases, lattice_paths, same_paths, Case};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 1;
const CORPUS_SIZE: u64 = 100;
const SIGMA: f64 = 3.0;
const SURVIVAL_WINDOW: usize = 10;

struct Outcome {
    pass: bool,
    detail: String,
    /// Every non-timing number the criterion looked at.
    fingerprint: String,
}

fn exhaustive_async(offset: usize) -> AsyncOptions {
    AsyncOptions {
        offset,
        backfill_beam: f64::INFINITY,
        ..AsyncOptions::from_decode(DecodeOptions::exhaustive())
    }
}

fn fixtures(seed: u64, small_order: usize, large_order: usize, count: usize) -> Vec<Case> {
    cases(count, seed, small_order, large_order)
}

fn exact_search() -> Outcome {
    let timer = Instant::now();
    let mut all = fixtures(1000, 1, 3, 12);
    all.extend(fixtures(2000, 2, 3, 12));
    let mut worst = 0.0f64;
    let mut fp = Vec::new();
    let mut sizes_ok = true;
    for case in &all {
        sizes_ok &= case.setup.hclg.num_states() <= 50 && case.ll.num_frames() <= 20;
        let (lat, _) = decode(&case.setup.hclg, &case.ll, &DecodeOptions::exhaustive()).unwrap();
        let base = best_path(&lat).unwrap().cost.total();
        worst = worst.max((base - best(&case.oracle_small)).abs());
        let (lat, _) = decode_biglm(&case.setup.big, &case.ll, &DecodeOptions::exhaustive()).unwrap();
        let big = best_path(&lat).unwrap().cost.total();
        worst = worst.max((big - best(&case.oracle)).abs());
        let mut row = vec![base, big];
        for offset in [1, 3, 5] {
            let (lat, _) = decode_async(&case.setup.big, &case.ll, &exhaustive_async(offset)).unwrap();
            let c = best_path(&lat).unwrap().cost.total();
            worst = worst.max((c - best(&case.oracle)).abs());
            row.push(c);
        }
        fp.push(row);
    }
    let secs = timer.elapsed().as_secs_f64();
    Outcome {
        pass: all.len() >= 20 && sizes_ok && worst <= 1e-9 && secs < 10.0,
        detail: format!("{} fixtures, max |best - oracle| = {worst:.2e}, {secs:.2}s", all.len()),
        fingerprint: format!("{fp:?}"),
    }
}

struct CorpusRun {
    biglm: (Vec<asyncdec_harness::UtteranceReport>, asyncdec_harness::Summary),
    asynch: (Vec<asyncdec_harness::UtteranceReport>, asyncdec_harness::Summary),
    seconds: f64,
}

fn corpus_run() -> CorpusRun {
    let timer = Instant::now();
    let setup = corpus_setup(CORPUS_SEED).unwrap();
    let inputs = Inputs {
        hclg: setup.hclg.clone(),
        words: setup.small.symbols().clone(),
        big: Some(setup.big.clone()),
    };
    let utts: Vec<Utterance> = (0..CORPUS_SIZE)
        .map(|i| {
            let (ll, words) = synthesize_loglikes(&setup.hclg, 1000 + i, SIGMA, None).unwrap();
            Utterance {
                id: format!("utt{i:04}"),
                ll,
                reference: Some(setup.spell(&words)),
            }
        })
        .collect();
    let corpus = Corpus::Synth {
        count: CORPUS_SIZE as usize,
        seed: 1000,
        sigma: SIGMA,
    };
    let mut big_cfg = ExperimentConfig::new(Mode::DecodeBiglm, PathBuf::new(), corpus.clone(), PathBuf::new());
    big_cfg.decode.survival_window = SURVIVAL_WINDOW;
    let async_cfg = ExperimentConfig::new(Mode::DecodeAsync, PathBuf::new(), corpus, PathBuf::new());
    let biglm = decode_corpus(&big_cfg, &inputs, &utts);
    let asynch = decode_corpus(&async_cfg, &inputs, &utts);
    CorpusRun {
        biglm,
        asynch,
        seconds: timer.elapsed().as_secs_f64(),
    }
}

fn parity(run: &CorpusRun) -> Outcome {
    let (b, a) = (&run.biglm.1, &run.asynch.1);
    let diff = compare_reports((&run.biglm.0, &Totals::from(b)), (&run.asynch.0, &Totals::from(a)));
    let dll = diff.mean_avg_ll_delta.unwrap_or(f64::INFINITY);
    let dwer = diff.wer_delta;
    Outcome {
        pass: b.failed == 0 && a.failed == 0 && dll.abs() < 1e-4 && dwer.abs() <= 0.1 && run.seconds < 120.0,
        detail: format!(
            "avg_ll biglm {:.6} async {:.6} (delta {dll:.2e}), WER biglm {:.2}% async {:.2}%, {} flagged, {:.1}s",
            b.mean_avg_ll.unwrap_or(f64::NAN),
            a.mean_avg_ll.unwrap_or(f64::NAN),
            b.wer_percent,
            a.wer_percent,
            diff.flagged.len(),
            run.seconds
        ),
        fingerprint: format!(
            "{:?} {:?} {} {} {:?}",
            b.mean_avg_ll, a.mean_avg_ll, b.word_errors, a.word_errors, diff.flagged
        ),
    }
}

fn work_reduction(run: &CorpusRun) -> Outcome {
    let (b, a) = (&run.biglm, &run.asynch);
    let fewer = b.0.iter().zip(&a.0).filter(|(x, y)| y.propagations < x.propagations).count();
    let share = fewer as f64 / b.0.len() as f64;
    let total_async = a.1.propagations + a.1.propagations_backfill;
    let reduction = 1.0 - total_async as f64 / b.1.propagations as f64;
    Outcome {
        pass: share >= 0.95 && total_async < b.1.propagations && reduction >= 0.10,
        detail: format!(
            "biglm {} vs async {} exploration + {} backfill = {} ({:.1}% fewer); exploration lower on {fewer}/{} utterances",
            b.1.propagations,
            a.1.propagations,
            a.1.propagations_backfill,
            total_async,
            100.0 * reduction,
            b.0.len()
        ),
        fingerprint: format!("{} {} {} {fewer}", b.1.propagations, a.1.propagations, a.1.propagations_backfill),
    }
}

fn identity_residual() -> Outcome {
    let mut setups: Vec<(Setup, asyncdec::am::LogLikelihoods)> = fixtures(3000, 1, 2, 10)
        .into_iter()
        .chain(fixtures(3500, 1, 3, 10))
        .map(|c| (c.setup, c.ll))
        .collect();
    let (flip, ll, _) = flip_setup().unwrap();
    setups.push((flip, ll));
    let mut bad = Vec::new();
    let mut fp = Vec::new();
    for (i, (setup, ll)) in setups.iter().enumerate() {
        let id = setup.identity().unwrap();
        let opts = DecodeOptions::default();
        let (base, bs) = decode(&id.hclg, ll, &opts).unwrap();
        let (big, gs) = decode_biglm(&id.big, ll, &opts).unwrap();
        let (asy, _) = decode_async(&id.big, ll, &AsyncOptions::default()).unwrap();
        let (pb, pg) = (best_path(&base).unwrap(), best_path(&big).unwrap());
        let paths_equal = same_paths(&lattice_paths(&asy), &lattice_paths(&base), 1e-9);
        if pb != pg || bs.propagations != gs.propagations || !paths_equal {
            bad.push(i);
        }
        fp.push((pb.cost.total(), bs.propagations, gs.propagations));
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!("{} fixtures, mismatches at {bad:?}", setups.len()),
        fingerprint: format!("{fp:?}"),
    }
}

fn rescoring_baseline() -> Outcome {
    let mut worst = 0.0f64;
    let mut fp = Vec::new();
    let all = fixtures(4000, 1, 3, 10);
    for case in &all {
        let opts = DecodeOptions::exhaustive();
        let (lat, _) = decode(&case.setup.hclg, &case.ll, &opts).unwrap();
        let rescored = best_path(&rescore_lattice(&lat, &case.setup.big.residual).unwrap()).unwrap();
        let (big, _) = decode_biglm(&case.setup.big, &case.ll, &opts).unwrap();
        let big = best_path(&big).unwrap();
        worst = worst.max((rescored.cost.total() - big.cost.total()).abs());
        fp.push(big.cost.total());
    }
    let (setup, ll, reference) = flip_setup().unwrap();
    let opts = DecodeOptions {
        beam: 6.0,
        ..DecodeOptions::default()
    };
    let (big, _) = decode_biglm(&setup.big, &ll, &opts).unwrap();
    let (base, _) = decode(&setup.hclg, &ll, &opts).unwrap();
    let rescored = rescore_lattice(&base, &setup.big.residual).unwrap();
    let big_words = setup.spell(&best_path(&big).unwrap().words);
    let res_words = setup.spell(&best_path(&rescored).unwrap().words);
    let (wb, wr) = (wer(&reference, &big_words).percent, wer(&reference, &res_words).percent);
    Outcome {
        pass: worst <= 1e-9 && wb <= wr,
        detail: format!(
            "{} full-beam fixtures, max |rescored - biglm| = {worst:.2e}; flip fixture at beam 6: biglm {big_words:?} WER {wb:.0}%, rescoring {res_words:?} WER {wr:.0}%",
            all.len()
        ),
        fingerprint: format!("{fp:?} {big_words:?} {res_words:?}"),
    }
}

fn pruning_soundness() -> Outcome {
    let beam = 8.0;
    let opts = DecodeOptions {
        lattice_beam: beam,
        prune_interval: 2,
        ..DecodeOptions::exhaustive()
    };
    let mut over = 0usize;
    let mut missing = 0usize;
    let mut total = 0usize;
    let mut fp = Vec::new();
    for case in fixtures(5000, 1, 3, 10) {
        let (lat, _) = decode_biglm(&case.setup.big, &case.ll, &opts).unwrap();
        let paths = lattice_paths(&lat);
        let top = best(&case.oracle);
        over += paths.iter().filter(|p| p.0 > top + beam + 1e-9).count();
        for o in case.oracle.iter().filter(|o| o.0 <= top + beam - 1e-6) {
            let found = paths.iter().any(|p| p.1 == o.1 && p.2 == o.2 && (p.0 - o.0).abs() <= 1e-9);
            missing += usize::from(!found);
        }
        total += paths.len();
        fp.push(paths.len());
    }
    Outcome {
        pass: over == 0 && missing == 0,
        detail: format!("10 decodes, {total} lattice paths, {over} beyond the beam, {missing} in-beam oracle paths missing"),
        fingerprint: format!("{fp:?} {over} {missing}"),
    }
}

fn lm_correctness() -> Outcome {
    let mut setups: Vec<Setup> = (1..=6).map(|s| tiny_setup(s, 1 + (s as usize % 2), 3).unwrap()).collect();
    setups.push(corpus_setup(CORPUS_SEED).unwrap());
    setups.push(flip_setup().unwrap().0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_lm, mut worst_res) = (0.0f64, 0.0f64);
    let mut fp = Vec::new();
    for setup in &setups {
        let vocab = setup.lexicon.words();
        let small = ArpaOracle::parse(&setup.small_arpa);
        let large = ArpaOracle::parse(&setup.large_arpa);
        for _ in 0..100 {
            let len = rng.random_range(0..12);
            let sentence: Vec<&str> = (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect();
            let lm_sum = |lm: &BackoffLm| {
                let mut state = lm.start();
                let mut total = 0.0;
                for w in &sentence {
                    let (next, c) = lm.step(state, lm.symbols().id(w).unwrap()).unwrap();
                    total += c;
                    state = next;
                }
                total + lm.final_cost(state)
            };
            let (gs, gl) = (small.sentence_cost(&sentence), large.sentence_cost(&sentence));
            worst_lm = worst_lm.max((lm_sum(&setup.small) - gs).abs()).max((lm_sum(&setup.large) - gl).abs());
            let r = &setup.big.residual;
            let mut state = r.start();
            let mut res = 0.0;
            for w in &sentence {
                let (next, c) = r.step(state, setup.small.symbols().id(w).unwrap()).unwrap();
                res += c;
                state = next;
            }
            res += r.final_cost(state);
            worst_res = worst_res.max((res - (gl - gs)).abs());
            fp.push(res);
        }
    }
    Outcome {
        pass: worst_lm <= 1e-9 && worst_res <= 1e-9,
        detail: format!(
            "{} model pairs x 100 sentences, max LM error {worst_lm:.2e}, max residual error {worst_res:.2e}",
            setups.len()
        ),
        fingerprint: format!("{fp:?}"),
    }
}

fn survival_shape(run: &CorpusRun) -> Outcome {
    let s = &run.biglm.1.survival;
    let monotone = s.windows(2).all(|w| w[1] <= w[0]);
    let ratio = s.get(SURVIVAL_WINDOW).copied().unwrap_or(f64::INFINITY) / s.first().copied().unwrap_or(0.0);
    let shown: Vec<String> = s.iter().map(|v| format!("{v:.2}")).collect();
    Outcome {
        pass: s.len() == SURVIVAL_WINDOW + 1 && monotone && ratio <= 0.5,
        detail: format!(
            "mean survivors by offset [{}], offset {SURVIVAL_WINDOW}/offset 0 = {ratio:.3}, monotone {monotone}",
            shown.join(", ")
        ),
        fingerprint: format!("{s:?}"),
    }
}

fn run_all() -> Vec<(usize, Outcome)> {
    let run = corpus_run();
    vec![
        (1, exact_search()),
        (2, parity(&run)),
        (3, work_reduction(&run)),
        (4, identity_residual()),
        (5, rescoring_baseline()),
        (6, pruning_soundness()),
        (7, lm_correctness()),
        (8, survival_shape(&run)),
    ]
}

fn main() -> ExitCode {
    let first = run_all();
    let second = run_all();
    let mut ok = true;
    for (n, outcome) in &first {
        ok &= outcome.pass;
        println!("criterion {n}: {} | {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    let differing: Vec<usize> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1.fingerprint != b.1.fingerprint || a.1.pass != b.1.pass)
        .map(|(a, _)| a.0)
        .collect();
    let deterministic = differing.is_empty();
    ok &= deterministic;
    println!(
        "criterion 9: {} | two runs, non-timing outputs differ in criteria {differing:?}",
        if deterministic { "PASS" } else { "FAIL" }
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
