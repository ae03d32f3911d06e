use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{read_file, HarnessError, Result, Summary, UtteranceReport};

/// Average log-likelihood differences at or above this are flagged.
pub const AVG_LL_TOLERANCE: f64 = 1e-4;

/// Per-utterance difference, `b - a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceDelta {
    pub id: String,
    pub avg_ll_delta: Option<f64>,
    pub cost_delta: Option<f64>,
    pub word_errors_delta: i64,
    pub words_differ: bool,
    pub propagations_delta: i64,
    pub propagations_backfill_delta: i64,
    pub wall_seconds_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub utterances: Vec<UtteranceDelta>,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    pub wer_delta: f64,
    pub mean_avg_ll_delta: Option<f64>,
    pub max_abs_avg_ll_delta: f64,
    pub propagations_delta: i64,
    pub propagations_backfill_delta: i64,
    pub propagations_total_delta: i64,
    pub rtf_delta: f64,
    /// Utterances whose average log-likelihood moved by at least the tolerance.
    pub flagged: Vec<String>,
}

/// Corpus totals used for comparison. Read separately from the summary so
/// that options serialized as `null` (infinite beams) do not matter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub wer_percent: f64,
    pub mean_avg_ll: Option<f64>,
    pub rtf: f64,
    pub propagations: u64,
    pub propagations_backfill: u64,
    pub propagations_total: u64,
}

impl From<&Summary> for Totals {
    fn from(s: &Summary) -> Self {
        Totals {
            wer_percent: s.wer_percent,
            mean_avg_ll: s.mean_avg_ll,
            rtf: s.rtf,
            propagations: s.propagations,
            propagations_backfill: s.propagations_backfill,
            propagations_total: s.propagations_total,
        }
    }
}

fn diff(a: u64, b: u64) -> i64 {
    b as i64 - a as i64
}

pub fn compare_reports(a: (&[UtteranceReport], &Totals), b: (&[UtteranceReport], &Totals)) -> CompareReport {
    let left: BTreeMap<&str, &UtteranceReport> = a.0.iter().map(|r| (r.id.as_str(), r)).collect();
    let right: BTreeMap<&str, &UtteranceReport> = b.0.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut utterances = Vec::new();
    let mut flagged = Vec::new();
    let mut max_abs = 0.0f64;
    for (id, x) in &left {
        let Some(y) = right.get(id) else { continue };
        let avg_ll_delta = x.avg_ll.zip(y.avg_ll).map(|(p, q)| q - p);
        match avg_ll_delta {
            Some(d) => {
                max_abs = max_abs.max(d.abs());
                if d.abs() >= AVG_LL_TOLERANCE {
                    flagged.push(id.to_string());
                }
            }
            // Decoded on one side only.
            None if x.avg_ll.is_some() != y.avg_ll.is_some() => flagged.push(id.to_string()),
            None => {}
        }
        utterances.push(UtteranceDelta {
            id: id.to_string(),
            avg_ll_delta,
            cost_delta: x.cost.zip(y.cost).map(|(p, q)| q - p),
            word_errors_delta: y.word_errors() as i64 - x.word_errors() as i64,
            words_differ: x.words != y.words,
            propagations_delta: diff(x.propagations, y.propagations),
            propagations_backfill_delta: diff(x.propagations_backfill, y.propagations_backfill),
            wall_seconds_delta: y.wall_seconds - x.wall_seconds,
        });
    }
    let missing = |m: &BTreeMap<&str, &UtteranceReport>, other: &BTreeMap<&str, &UtteranceReport>| {
        m.keys().filter(|k| !other.contains_key(*k)).map(|k| k.to_string()).collect()
    };
    let (sa, sb) = (a.1, b.1);
    CompareReport {
        utterances,
        only_in_a: missing(&left, &right),
        only_in_b: missing(&right, &left),
        wer_delta: sb.wer_percent - sa.wer_percent,
        mean_avg_ll_delta: sa.mean_avg_ll.zip(sb.mean_avg_ll).map(|(p, q)| q - p),
        max_abs_avg_ll_delta: max_abs,
        propagations_delta: diff(sa.propagations, sb.propagations),
        propagations_backfill_delta: diff(sa.propagations_backfill, sb.propagations_backfill),
        propagations_total_delta: diff(sa.propagations_total, sb.propagations_total),
        rtf_delta: sb.rtf - sa.rtf,
        flagged,
    }
}

fn read_run(dir: &Path) -> Result<(Vec<UtteranceReport>, Totals)> {
    let summary: Totals = serde_json::from_str(&read_file(&dir.join("summary.json"))?)?;
    let path = dir.join("utterances.jsonl");
    let reports = read_file(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<UtteranceReport>, _>>()
        .map_err(|e| HarnessError::Input {
            path: path.clone(),
            msg: e.to_string(),
        })?;
    Ok((reports, summary))
}

/// Compares two report directories written by `run_experiment`.
pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport> {
    let (ra, sa) = read_run(a)?;
    let (rb, sb) = read_run(b)?;
    Ok(compare_reports((&ra, &sa), (&rb, &sb)))
}
