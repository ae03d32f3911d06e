use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asyncdec::am::load_loglikes;
use asyncdec::fst::{read_text_fst, SymbolTable};
use asyncdec::lm::BackoffLm;
use asyncdec::synth::{flip_setup, Lexicon};
use asyncdec_harness::{compare_runs, make_fixture_suite, Summary, UtteranceReport};
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncdec")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_reports(dir: &Path) -> (Vec<UtteranceReport>, Summary) {
    let lines = std::fs::read_to_string(dir.join("utterances.jsonl")).unwrap();
    let reports = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let summary = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    (reports, summary)
}

fn strip_timing(mut r: UtteranceReport) -> UtteranceReport {
    r.wall_seconds = 0.0;
    r.explore_seconds = 0.0;
    r.backfill_seconds = 0.0;
    r
}

fn desk_run(suite: &Path, mode: &str, corpus: &str, out: &Path) -> Output {
    let d = suite.join("desk");
    bin(&[
        "run",
        "--mode",
        mode,
        "--hclg",
        p(&d.join("hclg.fst")),
        "--words",
        p(&d.join("words.txt")),
        "--lm-small",
        p(&d.join("small.arpa")),
        "--lm-large",
        p(&d.join("large.arpa")),
        "--loglikes",
        p(&d.join(corpus)),
        "--out",
        p(out),
    ])
}

#[test]
fn fixture_checksums_are_stable_per_seed() {
    let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
    let fa = make_fixture_suite(a.path(), 4).unwrap();
    let fb = make_fixture_suite(b.path(), 4).unwrap();
    let fc = make_fixture_suite(c.path(), 5).unwrap();
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);
    let listing = std::fs::read_to_string(a.path().join("checksums.sha256")).unwrap();
    assert_eq!(listing.lines().count(), fa.len());
}

#[test]
fn fixtures_round_trip_through_readers() {
    let dir = TempDir::new().unwrap();
    let files = make_fixture_suite(dir.path(), 2).unwrap();
    for f in &files {
        let path = dir.path().join(&f.path);
        let text = std::fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap();
        match path.extension().and_then(|e| e.to_str()) {
            Some("fst") => assert!(read_text_fst(&text, false).unwrap().num_states() > 0, "{name}"),
            Some("arpa") => assert!(BackoffLm::from_arpa(&text).unwrap().order() >= 1),
            Some("csv") => assert!(load_loglikes(&text).unwrap().num_frames() > 0),
            Some("txt") if name == "words.txt" => assert!(SymbolTable::read_text(&text).unwrap().len() > 1),
            Some("txt") if name == "lexicon.txt" => {
                let lex = Lexicon::from_text(&text).unwrap();
                assert_eq!(Lexicon::from_text(&lex.to_text()).unwrap(), lex);
            }
            _ => {}
        }
    }
}

#[test]
fn clean_corpus_decodes_without_errors() {
    let suite = TempDir::new().unwrap();
    make_fixture_suite(suite.path(), 1).unwrap();
    let out = suite.path().join("run");
    let res = desk_run(suite.path(), "decode-biglm", "sigma-0", &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (reports, summary) = read_reports(&out);
    assert_eq!(reports.len(), 5);
    assert_eq!(summary.failed, 0);
    assert_eq!(summary.wer_percent, 0.0);
    assert!(summary.ref_words > 0);
    let audio: f64 = reports.iter().map(|r| r.frames as f64 * 0.01).sum();
    assert!((summary.rtf - summary.wall_seconds / audio).abs() < 1e-9);
    let printed: Summary = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(printed.without_timing(), summary.without_timing());
}

#[test]
fn repeated_runs_match_except_timing() {
    let suite = TempDir::new().unwrap();
    make_fixture_suite(suite.path(), 1).unwrap();
    let (a, b) = (suite.path().join("a"), suite.path().join("b"));
    for out in [&a, &b] {
        assert!(desk_run(suite.path(), "decode-async", "sigma-3", out).status.success());
    }
    let (ra, sa) = read_reports(&a);
    let (rb, sb) = read_reports(&b);
    let strip = |v: Vec<UtteranceReport>| v.into_iter().map(strip_timing).collect::<Vec<_>>();
    assert_eq!(strip(ra), strip(rb));
    assert_eq!(sa.without_timing(), sb.without_timing());

    let diff = compare_runs(&a, &a).unwrap();
    assert!(diff.flagged.is_empty());
    assert_eq!(diff.wer_delta, 0.0);
    assert_eq!(diff.mean_avg_ll_delta, Some(0.0));
    assert_eq!(diff.propagations_total_delta, 0);
    assert!(diff.utterances.iter().all(|u| u.avg_ll_delta == Some(0.0) && !u.words_differ));
}

#[test]
fn compare_shows_the_large_lm_changing_words() {
    let dir = TempDir::new().unwrap();
    let (setup, ll, _) = flip_setup().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let hclg = write("hclg.fst", &asyncdec::fst::write_text_fst(&setup.hclg, false));
    let words = write("words.txt", &setup.small.symbols().write_text());
    let small = write("small.arpa", &setup.small_arpa);
    let large = write("large.arpa", &setup.large_arpa);
    let utt = write("flip.csv", &ll.to_csv());
    write("flip.txt", "a y\n");
    let run = |mode: &str| -> PathBuf {
        let out = dir.path().join(mode);
        let res = bin(&[
            "run", "--mode", mode, "--hclg", p(&hclg), "--words", p(&words), "--lm-small", p(&small),
            "--lm-large", p(&large), "--loglikes", p(&utt), "--beam", "6", "--out", p(&out),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        out
    };
    let (base, big) = (run("decode"), run("decode-biglm"));
    let diff_path = dir.path().join("diff.json");
    assert!(bin(&["compare", p(&base), p(&big), "--out", p(&diff_path)]).status.success());
    let diff: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(diff_path).unwrap()).unwrap();
    assert_eq!(diff["utterances"][0]["words_differ"], true);
    assert!(diff["wer_delta"].as_f64().unwrap() < 0.0);
}

#[test]
fn sweep_writes_one_row_per_setting() {
    let suite = TempDir::new().unwrap();
    make_fixture_suite(suite.path(), 1).unwrap();
    let d = suite.path().join("desk");
    let out = suite.path().join("sweep");
    let res = bin(&[
        "sweep", "--mode", "decode-async", "--hclg", p(&d.join("hclg.fst")), "--lm-small",
        p(&d.join("small.arpa")), "--lm-large", p(&d.join("large.arpa")), "--synth-count", "3",
        "--beams", "8,15", "--offsets", "1,3,5", "--out", p(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.starts_with("mode,beam,offset,wer_percent"));
}

#[test]
fn survival_csv_is_written_when_requested() {
    let suite = TempDir::new().unwrap();
    make_fixture_suite(suite.path(), 1).unwrap();
    let d = suite.path().join("desk");
    let out = suite.path().join("surv");
    let res = bin(&[
        "run", "--mode", "decode-biglm", "--hclg", p(&d.join("hclg.fst")), "--lm-small",
        p(&d.join("small.arpa")), "--lm-large", p(&d.join("large.arpa")), "--synth-count", "4",
        "--survival-window", "6", "--out", p(&out),
    ]);
    assert!(res.status.success());
    let csv = std::fs::read_to_string(out.join("survival.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7);
}

#[test]
fn failures_exit_nonzero_with_json() {
    let dir = TempDir::new().unwrap();
    let cases: [&[&str]; 3] = [
        &["run", "--mode", "decode", "--hclg", "/nonexistent.fst", "--synth-count", "1", "--out", p(dir.path())],
        &["run", "--mode", "rescore", "--hclg", "/nonexistent.fst", "--synth-count", "1", "--out", p(dir.path())],
        &["compare", p(dir.path()), p(dir.path())],
    ];
    for args in cases {
        let res = bin(args);
        assert!(!res.status.success());
        let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
        assert!(err["error"].is_string() && err["message"].is_string());
    }
}
