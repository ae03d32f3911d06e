//! Synthetic fixtures: lexicons, random ARPA models and small decoding graphs.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::sync::Arc as Shared;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::am::AmError;
use crate::decoder::{BigLmGraph, DecodeError};
use crate::fst::{compose_static, Arc, FstError, Label, SymbolTable, Wfst, WfstBuilder, EPSILON};
use crate::lm::{lm_to_wfst, BackoffLm, LmError, ResidualGrammar};
use crate::semiring::DualCost;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Fst(#[from] FstError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Am(#[from] AmError),
    #[error("lexicon: {0}")]
    Lexicon(String),
}

/// Pronunciations over emitting labels; every phone belongs to one word.
#[derive(Clone, Debug, PartialEq)]
pub struct Lexicon {
    pub entries: Vec<(String, Vec<Label>)>,
}

impl Lexicon {
    /// `words[i]` gets between `min_phones` and `max_phones` fresh phones,
    /// numbered consecutively from 1.
    pub fn generate(words: &[String], min_phones: usize, max_phones: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut next: Label = 1;
        let entries = words
            .iter()
            .map(|w| {
                let n = rng.random_range(min_phones..=max_phones);
                let phones = (next..next + n as Label).collect();
                next += n as Label;
                (w.clone(), phones)
            })
            .collect();
        Lexicon { entries }
    }

    pub fn words(&self) -> Vec<String> {
        self.entries.iter().map(|(w, _)| w.clone()).collect()
    }

    pub fn num_phones(&self) -> usize {
        self.entries
            .iter()
            .flat_map(|(_, p)| p.iter())
            .copied()
            .max()
            .unwrap_or(0) as usize
    }

    /// `word phone phone ...` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, phones) in &self.entries {
            let p: Vec<String> = phones.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{w} {}", p.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SynthError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let phones = fields
                .map(|f| match f.parse::<Label>() {
                    Ok(p) if p != EPSILON => Ok(p),
                    _ => Err(SynthError::Lexicon(format!("line {}: bad phone {f:?}", i + 1))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if phones.is_empty() {
                return Err(SynthError::Lexicon(format!("line {}: no phones", i + 1)));
            }
            entries.push((word.to_string(), phones));
        }
        Ok(Lexicon { entries })
    }

    /// Lexicon transducer with word ids from `symbols`. Each phone state has
    /// a self-loop; leaving a phone costs `ln 2`, as does staying.
    pub fn to_wfst(&self, symbols: &SymbolTable) -> Result<Wfst, SynthError> {
        let mut b = WfstBuilder::new();
        let root = b.add_state();
        b.set_start(root);
        b.set_final(root, DualCost::one());
        let step = DualCost::graph_only(LN_2);
        for (word, phones) in &self.entries {
            let id = symbols
                .id(word)
                .ok_or_else(|| SynthError::Lexicon(format!("{word:?} not in the word table")))?;
            let mut prev = root;
            for (k, &p) in phones.iter().enumerate() {
                let s = b.add_state();
                let (olabel, w) = if k == 0 { (id, DualCost::one()) } else { (EPSILON, step) };
                b.add_arc(prev, Arc::new(p, olabel, w, s));
                b.add_arc(s, Arc::new(p, EPSILON, step, s));
                prev = s;
            }
            b.add_arc(prev, Arc::new(EPSILON, EPSILON, step, root));
        }
        Ok(b.build()?)
    }
}

/// `w00`, `w01`, ...
pub fn word_list(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n).map(|i| format!("w{i:0width$}")).collect()
}

fn log10(p: f64) -> f64 {
    p.log10()
}

/// Normalized random weights.
fn simplex(rng: &mut ChaCha8Rng, n: usize, mass: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0f64).powi(3)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|r| mass * r / sum).collect()
}

/// A random, properly normalized backoff model of the given order over
/// `words`. Each history lists `branching` explicit successors.
pub fn random_arpa(words: &[String], order: usize, branching: usize, seed: u64) -> String {
    assert!((1..=3).contains(&order), "orders 1 to 3 supported");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut succ: Vec<String> = words.to_vec();
    succ.push("</s>".into());
    let eos_share = 0.12;
    let mut uni: BTreeMap<String, f64> = words
        .iter()
        .cloned()
        .zip(simplex(&mut rng, words.len(), 1.0 - eos_share))
        .collect();
    uni.insert("</s>".into(), eos_share);

    let mut histories1: Vec<String> = vec!["<s>".into()];
    histories1.extend(words.iter().cloned());
    // Bigrams: explicit probabilities and backoff weights.
    let mut bi: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut bow1: HashMap<String, f64> = HashMap::new();
    if order >= 2 {
        for h in &histories1 {
            let mut cands: Vec<&String> = succ.iter().filter(|w| *w != h).collect();
            cands.shuffle(&mut rng);
            cands.truncate(branching.min(cands.len()));
            let mass = rng.random_range(0.5..0.85);
            let ps = simplex(&mut rng, cands.len(), mass);
            let lower: f64 = cands.iter().map(|w| uni[*w]).sum();
            for (w, p) in cands.iter().zip(ps) {
                bi.insert((h.clone(), (*w).clone()), p);
            }
            bow1.insert(h.clone(), (1.0 - mass) / (1.0 - lower));
        }
    }
    let p_bigram = |h: &str, w: &str| -> f64 {
        bi.get(&(h.to_string(), w.to_string()))
            .copied()
            .unwrap_or_else(|| bow1[h] * uni[w])
    };
    let mut tri: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    let mut bow2: HashMap<(String, String), f64> = HashMap::new();
    if order >= 3 {
        let hist2: Vec<(String, String)> = bi
            .keys()
            .filter(|(_, w)| w != "</s>")
            .cloned()
            .collect();
        for (h1, h2) in hist2 {
            let mut cands: Vec<&String> = succ.iter().collect();
            cands.shuffle(&mut rng);
            cands.truncate(branching.min(cands.len()));
            let mass = rng.random_range(0.5..0.85);
            let ps = simplex(&mut rng, cands.len(), mass);
            let lower: f64 = cands.iter().map(|w| p_bigram(&h2, w)).sum();
            for (w, p) in cands.iter().zip(ps) {
                tri.insert((h1.clone(), h2.clone(), (*w).clone()), p);
            }
            bow2.insert((h1, h2), (1.0 - mass) / (1.0 - lower));
        }
    }

    let mut out = String::from("\\data\\\n");
    let _ = writeln!(out, "ngram 1={}", uni.len() + 1);
    if order >= 2 {
        let _ = writeln!(out, "ngram 2={}", bi.len());
    }
    if order >= 3 {
        let _ = writeln!(out, "ngram 3={}", tri.len());
    }
    out.push_str("\n\\1-grams:\n");
    let bos_bow = bow1.get("<s>").map(|b| format!("\t{:.9}", log10(*b))).unwrap_or_default();
    let _ = writeln!(out, "-99\t<s>{bos_bow}");
    for (w, p) in &uni {
        let bow = bow1.get(w).map(|b| format!("\t{:.9}", log10(*b))).unwrap_or_default();
        let _ = writeln!(out, "{:.9}\t{w}{bow}", log10(*p));
    }
    if order >= 2 {
        out.push_str("\n\\2-grams:\n");
        for ((h, w), p) in &bi {
            let bow = bow2
                .get(&(h.clone(), w.clone()))
                .map(|b| format!("\t{:.9}", log10(*b)))
                .unwrap_or_default();
            let _ = writeln!(out, "{:.9}\t{h} {w}{bow}", log10(*p));
        }
    }
    if order >= 3 {
        out.push_str("\n\\3-grams:\n");
        for ((a, b, w), p) in &tri {
            let _ = writeln!(out, "{:.9}\t{a} {b} {w}", log10(*p));
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

/// Decoding graph `L o G`, trimmed.
pub fn build_hclg(lexicon: &Lexicon, g: &BackoffLm) -> Result<Wfst, SynthError> {
    let l = lexicon.to_wfst(g.symbols())?;
    let gw = lm_to_wfst(g)?;
    let hclg = compose_static(&l, &gw);
    if hclg.is_empty() {
        return Err(SynthError::Lexicon("composition is empty".into()));
    }
    Ok(hclg.with_symbols(None, Some(g.symbols().clone())))
}

/// A graph built with a small LM together with the residual to a large one.
#[derive(Clone, Debug)]
pub struct Setup {
    pub lexicon: Lexicon,
    pub small_arpa: String,
    pub large_arpa: String,
    pub small: Shared<BackoffLm>,
    pub large: Shared<BackoffLm>,
    pub hclg: Shared<Wfst>,
    pub big: BigLmGraph,
}

impl Setup {
    pub fn new(lexicon: Lexicon, small_arpa: String, large_arpa: String) -> Result<Self, SynthError> {
        let small = Shared::new(BackoffLm::from_arpa(&small_arpa)?);
        let large = Shared::new(BackoffLm::from_arpa(&large_arpa)?);
        let hclg = Shared::new(build_hclg(&lexicon, &small)?);
        let residual = Shared::new(ResidualGrammar::new(small.clone(), large.clone())?);
        let big = BigLmGraph::new(hclg.clone(), residual)?;
        Ok(Setup {
            lexicon,
            small_arpa,
            large_arpa,
            small,
            large,
            hclg,
            big,
        })
    }

    /// Same graph with `G' = G`.
    pub fn identity(&self) -> Result<Self, SynthError> {
        Setup::new(self.lexicon.clone(), self.small_arpa.clone(), self.small_arpa.clone())
    }

    /// Word strings for ids of the small model.
    pub fn spell(&self, words: &[Label]) -> Vec<String> {
        words
            .iter()
            .map(|&w| self.small.symbols().symbol(w).unwrap_or("<?>").to_string())
            .collect()
    }
}

/// Desk-scale corpus setting: a trigram large LM and, as graph LM, the
/// same model cut back to bigrams.
pub fn corpus_setup(seed: u64) -> Result<Setup, SynthError> {
    let words = word_list(24);
    let lexicon = Lexicon::generate(&words, 2, 3, seed);
    let small = random_arpa(&words, 2, 6, seed ^ 0xa5);
    let large = random_arpa(&words, 3, 6, seed ^ 0xa5);
    Setup::new(lexicon, small, large)
}

/// Tiny random setting for exhaustive checks.
pub fn tiny_setup(seed: u64, small_order: usize, large_order: usize) -> Result<Setup, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=3);
    let words = word_list(n);
    let lexicon = Lexicon::generate(&words, 1, 2, seed);
    let small = random_arpa(&words, small_order, 2, seed.wrapping_mul(3));
    let large = random_arpa(&words, large_order, 2, seed.wrapping_mul(7));
    Setup::new(lexicon, small, large)
}

/// Setting where the large LM overturns the graph LM's word choice.
///
/// Words `a`, `x`, `y` have one phone each. The graph LM makes `y` about 7
/// nats worse than `x`; the large LM strongly prefers `y` after `a`. The
/// returned phone sequence spells `a y` with `x` and `y` acoustically tied.
pub fn flip_setup() -> Result<(Setup, crate::am::LogLikelihoods, Vec<String>), SynthError> {
    let lexicon = Lexicon {
        entries: vec![
            ("a".into(), vec![1]),
            ("x".into(), vec![2]),
            ("y".into(), vec![3]),
        ],
    };
    let small = "\\data\\\nngram 1=5\n\n\\1-grams:\n-99\t<s>\n-0.5\t</s>\n-0.4\ta\n-0.5\tx\n-3.5\ty\n\n\\end\\\n";
    let large = "\\data\\\nngram 1=5\nngram 2=4\n\n\\1-grams:\n-99\t<s>\t0\n-0.5\t</s>\n-0.4\ta\t-1.0\n-0.5\tx\t0\n-3.5\ty\t0\n\n\\2-grams:\n-0.05\t<s> a\n-0.02\ta y\n-3.0\ta x\n-0.1\ty </s>\n\n\\end\\\n";
    let setup = Setup::new(lexicon, small.into(), large.into())?;
    // Frames: a a a, then x/y tied.
    let frames = 6;
    let mut values = Vec::new();
    for t in 0..frames {
        let row = if t < 3 { [0.0, -6.0, -6.0] } else { [-6.0, 0.0, 0.0] };
        values.extend(row);
    }
    let ll = crate::am::LogLikelihoods::new(frames, 3, values)?;
    Ok((setup, ll, vec!["a".into(), "y".into()]))
}

/// Random matrix with every entry in `[-spread, 0]`.
pub fn random_loglikes(frames: usize, labels: usize, spread: f64, seed: u64) -> crate::am::LogLikelihoods {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..frames * labels)
        .map(|_| -rng.random_range(0.0..spread))
        .collect();
    crate::am::LogLikelihoods::new(frames, labels, values).expect("finite by construction")
}

/// Linear acceptor of the frames of `ll`: one arc per label per frame with
/// the acoustic cost in the acoustic component. Composing it with a graph
/// spells out every frame alignment.
pub fn frames_to_wfst(ll: &crate::am::LogLikelihoods, scale: f64) -> Wfst {
    let mut b = WfstBuilder::new();
    for _ in 0..=ll.num_frames() {
        b.add_state();
    }
    b.set_start(0);
    for t in 0..ll.num_frames() {
        for l in 1..=ll.num_labels() as Label {
            b.add_arc(t, Arc::new(l, l, DualCost::new(0.0, ll.cost(t, l, scale)), t + 1));
        }
    }
    b.set_final(ll.num_frames(), DualCost::one());
    b.build().expect("linear machine")
}
