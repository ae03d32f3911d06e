use std::path::Path;
use std::sync::Arc;

use asyncdec::am::{load_loglikes, synthesize_loglikes, LogLikelihoods};
use asyncdec::decoder::BigLmGraph;
use asyncdec::fst::{read_text_fst, Label, SymbolTable, Wfst};
use asyncdec::lm::{BackoffLm, ResidualGrammar};

use crate::{read_file, Corpus, ExperimentConfig, HarnessError, Result};

/// Graphs and models of one experiment, shared by all utterances.
pub struct Inputs {
    pub hclg: Arc<Wfst>,
    pub words: SymbolTable,
    pub big: Option<BigLmGraph>,
}

impl Inputs {
    pub fn spell(&self, labels: &[Label]) -> Vec<String> {
        labels
            .iter()
            .map(|&l| self.words.symbol(l).map_or_else(|| l.to_string(), str::to_string))
            .collect()
    }
}

pub struct Utterance {
    pub id: String,
    pub ll: LogLikelihoods,
    pub reference: Option<Vec<String>>,
}

fn input_error(path: &Path, err: impl std::fmt::Display) -> HarnessError {
    HarnessError::Input {
        path: path.to_path_buf(),
        msg: err.to_string(),
    }
}

fn load_lm(path: &Path, words: Option<&SymbolTable>) -> Result<BackoffLm> {
    let text = read_file(path)?;
    match words {
        Some(w) => BackoffLm::from_arpa_with_symbols(&text, w),
        None => BackoffLm::from_arpa(&text),
    }
    .map_err(|e| input_error(path, e))
}

pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Inputs> {
    let hclg = read_text_fst(&read_file(&cfg.hclg)?, false).map_err(|e| input_error(&cfg.hclg, e))?;
    let table = match &cfg.words {
        Some(p) => Some(SymbolTable::read_text(&read_file(p)?).map_err(|e| input_error(p, e))?),
        None => None,
    };
    let small = match &cfg.lm_small {
        Some(p) => Some(load_lm(p, table.as_ref())?),
        None => None,
    };
    let words = table
        .or_else(|| small.as_ref().map(|lm| lm.symbols().clone()))
        .unwrap_or_default();
    let hclg = Arc::new(hclg);
    let big = match (small, &cfg.lm_large) {
        (Some(small), Some(p)) => {
            let large = load_lm(p, None)?;
            let residual = ResidualGrammar::new(Arc::new(small), Arc::new(large)).map_err(|e| input_error(p, e))?;
            Some(BigLmGraph::new(hclg.clone(), Arc::new(residual))?)
        }
        _ => None,
    };
    Ok(Inputs { hclg, words, big })
}

fn load_reference(csv: &Path) -> Result<Option<Vec<String>>> {
    let path = csv.with_extension("txt");
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(read_file(&path)?.split_whitespace().map(str::to_string).collect()))
}

fn load_matrix(path: &Path) -> Result<Utterance> {
    let ll = load_loglikes(&read_file(path)?).map_err(|e| input_error(path, e))?;
    let id = path
        .file_stem()
        .map_or_else(|| "utt".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Utterance {
        id,
        ll,
        reference: load_reference(path)?,
    })
}

/// Utterances sorted by id.
pub fn load_corpus(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<Vec<Utterance>> {
    let mut utts = match &cfg.corpus {
        Corpus::Files(path) if path.is_dir() => {
            let entries = std::fs::read_dir(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            let mut out = Vec::new();
            for entry in entries {
                let p = entry
                    .map_err(|source| HarnessError::Io {
                        path: path.clone(),
                        source,
                    })?
                    .path();
                if p.extension().is_some_and(|e| e == "csv") {
                    out.push(load_matrix(&p)?);
                }
            }
            if out.is_empty() {
                return Err(input_error(path, "no .csv matrices found"));
            }
            out
        }
        Corpus::Files(path) => vec![load_matrix(path)?],
        &Corpus::Synth { count, seed, sigma } => (0..count as u64)
            .map(|i| {
                let (ll, words) = synthesize_loglikes(&inputs.hclg, seed + i, sigma, None)?;
                Ok(Utterance {
                    id: format!("utt{i:04}"),
                    ll,
                    reference: Some(inputs.spell(&words)),
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    utts.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(utts)
}
