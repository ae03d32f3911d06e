use std::path::Path;
use std::time::Instant;

use asyncdec::am::LogLikelihoods;
use asyncdec::decoder::{
    best_path, decode, decode_async, decode_biglm, AsyncOptions, DecodeError, DecodeStats, Lattice,
};
use asyncdec::eval::{avg_loglike, rescore_lattice, wer};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, load_inputs, Inputs, Utterance};
use crate::{write_file, ExperimentConfig, HarnessError, Mode, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceReport {
    pub id: String,
    pub frames: usize,
    pub words: Option<Vec<String>>,
    pub reference: Option<Vec<String>>,
    pub cost: Option<f64>,
    pub avg_ll: Option<f64>,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub wall_seconds: f64,
    pub explore_seconds: f64,
    pub backfill_seconds: f64,
    pub propagations: u64,
    pub propagations_backfill: u64,
    pub error: Option<String>,
}

impl UtteranceReport {
    pub fn word_errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub options: AsyncOptions,
    pub utterances: usize,
    pub failed: usize,
    pub ref_words: usize,
    pub word_errors: usize,
    pub wer_percent: f64,
    /// Over decoded utterances; `None` if every decode failed.
    pub mean_avg_ll: Option<f64>,
    pub total_frames: usize,
    pub audio_seconds: f64,
    pub wall_seconds: f64,
    pub rtf: f64,
    pub propagations: u64,
    pub propagations_backfill: u64,
    pub propagations_total: u64,
    /// Mean surviving tokens per offset; empty unless recorded.
    pub survival: Vec<f64>,
}

impl Summary {
    /// The same summary with wall-clock fields zeroed.
    pub fn without_timing(&self) -> Summary {
        Summary {
            wall_seconds: 0.0,
            rtf: 0.0,
            ..self.clone()
        }
    }
}

fn decode_one(
    mode: Mode,
    inputs: &Inputs,
    ll: &LogLikelihoods,
    opts: &AsyncOptions,
) -> std::result::Result<(Lattice, DecodeStats), DecodeError> {
    let big = || inputs.big.as_ref().ok_or_else(|| DecodeError::Options("large LM not loaded".into()));
    match mode {
        Mode::Decode => decode(&inputs.hclg, ll, &opts.decode),
        Mode::DecodeBiglm => decode_biglm(big()?, ll, &opts.decode),
        Mode::DecodeAsync => decode_async(big()?, ll, opts),
        Mode::Rescore => {
            let (lat, stats) = decode(&inputs.hclg, ll, &opts.decode)?;
            Ok((rescore_lattice(&lat, &big()?.residual)?, stats))
        }
    }
}

fn run_utterance(mode: Mode, inputs: &Inputs, utt: &Utterance, opts: &AsyncOptions) -> (UtteranceReport, Vec<f64>) {
    let timer = Instant::now();
    let outcome = decode_one(mode, inputs, &utt.ll, opts);
    let wall = timer.elapsed().as_secs_f64();
    let frames = utt.ll.num_frames();
    let mut report = UtteranceReport {
        id: utt.id.clone(),
        frames,
        words: None,
        reference: utt.reference.clone(),
        cost: None,
        avg_ll: None,
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        wall_seconds: wall,
        explore_seconds: 0.0,
        backfill_seconds: 0.0,
        propagations: 0,
        propagations_backfill: 0,
        error: None,
    };
    let mut survival = Vec::new();
    let stats = match outcome {
        Ok((lat, stats)) => {
            match best_path(&lat) {
                Ok(p) => {
                    report.words = Some(inputs.spell(&p.words));
                    report.cost = Some(p.cost.total());
                    report.avg_ll = avg_loglike(&lat, frames).ok();
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            survival = stats.survival.clone();
            Some(stats)
        }
        Err(DecodeError::Failed { frame, stats }) => {
            report.error = Some(format!("no surviving tokens at frame {frame}"));
            Some(*stats)
        }
        Err(e) => {
            report.error = Some(e.to_string());
            None
        }
    };
    if let Some(s) = stats {
        report.propagations = s.propagations;
        report.propagations_backfill = s.propagations_backfill;
        report.explore_seconds = s.explore_seconds;
        report.backfill_seconds = s.backfill_seconds;
    }
    if let Some(r) = &utt.reference {
        // A failed utterance scores as an empty hypothesis.
        let hyp = report.words.clone().unwrap_or_default();
        let w = wer(r, &hyp);
        report.substitutions = w.substitutions;
        report.deletions = w.deletions;
        report.insertions = w.insertions;
    }
    (report, survival)
}

/// Decodes every utterance and aggregates; touches no files.
pub fn decode_corpus(cfg: &ExperimentConfig, inputs: &Inputs, utts: &[Utterance]) -> (Vec<UtteranceReport>, Summary) {
    let opts = cfg.async_options();
    let mut reports = Vec::with_capacity(utts.len());
    let mut survival: Vec<f64> = Vec::new();
    let mut survival_n = 0usize;
    for utt in utts {
        let (report, surv) = run_utterance(cfg.mode, inputs, utt, &opts);
        if !surv.is_empty() {
            survival.resize(surv.len(), 0.0);
            for (acc, v) in survival.iter_mut().zip(&surv) {
                *acc += v;
            }
            survival_n += 1;
        }
        reports.push(report);
    }
    survival.iter_mut().for_each(|v| *v /= survival_n.max(1) as f64);
    let ok: Vec<&UtteranceReport> = reports.iter().filter(|r| r.avg_ll.is_some()).collect();
    let ref_words: usize = reports.iter().filter_map(|r| r.reference.as_ref()).map(Vec::len).sum();
    let word_errors: usize = reports.iter().filter(|r| r.reference.is_some()).map(UtteranceReport::word_errors).sum();
    let audio_seconds: f64 = utts.iter().map(|u| u.ll.duration()).sum();
    let wall_seconds: f64 = reports.iter().map(|r| r.wall_seconds).sum();
    let propagations: u64 = reports.iter().map(|r| r.propagations).sum();
    let propagations_backfill: u64 = reports.iter().map(|r| r.propagations_backfill).sum();
    let summary = Summary {
        mode: cfg.mode,
        options: opts,
        utterances: reports.len(),
        failed: reports.len() - ok.len(),
        ref_words,
        word_errors,
        wer_percent: if ref_words > 0 {
            100.0 * word_errors as f64 / ref_words as f64
        } else {
            0.0
        },
        mean_avg_ll: (!ok.is_empty()).then(|| ok.iter().filter_map(|r| r.avg_ll).sum::<f64>() / ok.len() as f64),
        total_frames: utts.iter().map(|u| u.ll.num_frames()).sum(),
        audio_seconds,
        wall_seconds,
        rtf: if audio_seconds > 0.0 { wall_seconds / audio_seconds } else { 0.0 },
        propagations,
        propagations_backfill,
        propagations_total: propagations + propagations_backfill,
        survival,
    };
    (reports, summary)
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Input {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn write_survival(path: &Path, survival: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["offset", "mean_tokens"]).map_err(|e| csv_error(path, e))?;
    for (k, v) in survival.iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    write_file(path, &String::from_utf8_lossy(&bytes))
}

/// Runs `cfg` and writes `utterances.jsonl`, `summary.json` and, when token
/// survival was recorded, `survival.csv` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let utts = load_corpus(cfg, &inputs)?;
    let (reports, summary) = decode_corpus(cfg, &inputs, &utts);
    let mut lines = Vec::new();
    for r in &reports {
        serde_json::to_writer(&mut lines, r)?;
        lines.push(b'\n');
    }
    write_file(&cfg.out.join("utterances.jsonl"), &String::from_utf8_lossy(&lines))?;
    write_file(&cfg.out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    if !summary.survival.is_empty() {
        write_survival(&cfg.out.join("survival.csv"), &summary.survival)?;
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mode: Mode,
    pub beam: f64,
    pub offset: usize,
    pub wer_percent: f64,
    pub mean_avg_ll: Option<f64>,
    pub rtf: f64,
    pub propagations: u64,
    pub propagations_backfill: u64,
    pub failed: usize,
}

/// Decodes the corpus once per beam (and per offset in async mode) and
/// writes `sweep.csv` into `cfg.out`.
pub fn run_sweep(cfg: &ExperimentConfig, beams: &[f64], offsets: &[usize]) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let utts = load_corpus(cfg, &inputs)?;
    let offsets: Vec<usize> = if cfg.mode == Mode::DecodeAsync && !offsets.is_empty() {
        offsets.to_vec()
    } else {
        vec![cfg.offset]
    };
    let mut points = Vec::new();
    for &beam in beams {
        for &offset in &offsets {
            let mut c = cfg.clone();
            c.decode.beam = beam;
            c.offset = offset;
            c.validate()?;
            let (_, s) = decode_corpus(&c, &inputs, &utts);
            points.push(SweepPoint {
                mode: c.mode,
                beam,
                offset,
                wer_percent: s.wer_percent,
                mean_avg_ll: s.mean_avg_ll,
                rtf: s.rtf,
                propagations: s.propagations,
                propagations_backfill: s.propagations_backfill,
                failed: s.failed,
            });
        }
    }
    let path = cfg.out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &points {
        w.serialize(p).map_err(|e| csv_error(&path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    write_file(&path, &String::from_utf8_lossy(&bytes))?;
    Ok(points)
}
