use std::collections::HashMap;
use std::f64::consts::LN_10;

use crate::fst::{Label, SymbolTable, EPSILON};

use super::{LmError, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// A history context of the model, identified by its index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LmState(pub u32);

#[derive(Clone, Debug)]
struct Context {
    history: Vec<Label>,
    /// Backoff penalty as a cost (negated natural log).
    backoff: f64,
    /// Longest proper suffix of `history` that is itself a context.
    parent: Option<u32>,
    /// Explicit n-grams `history + w`: cost and successor context.
    words: HashMap<Label, (f64, u32)>,
}

/// ARPA backoff n-gram model, scored as negated natural-log probabilities.
#[derive(Clone, Debug)]
pub struct BackoffLm {
    order: usize,
    symbols: SymbolTable,
    contexts: Vec<Context>,
    context_ids: HashMap<Vec<Label>, u32>,
    start: LmState,
    bos: Option<Label>,
    eos: Option<Label>,
    unk: Option<Label>,
}

struct Entry {
    words: Vec<Label>,
    cost: f64,
    backoff: Option<f64>,
}

fn log10_to_cost(v: f64) -> f64 {
    -v * LN_10
}

impl BackoffLm {
    /// Loads an ARPA file, assigning word ids in unigram order after `<eps>`.
    pub fn from_arpa(text: &str) -> Result<Self> {
        Self::load(text, None)
    }

    /// Loads an ARPA file using the ids of an existing word table; every word
    /// of the model must be present in `symbols`.
    pub fn from_arpa_with_symbols(text: &str, symbols: &SymbolTable) -> Result<Self> {
        Self::load(text, Some(symbols))
    }

    fn load(text: &str, fixed: Option<&SymbolTable>) -> Result<Self> {
        let mut symbols = fixed.cloned().unwrap_or_else(SymbolTable::with_epsilon);
        let mut intern = |w: &str, line: usize| -> Result<Label> {
            match fixed {
                Some(t) => t.id(w).ok_or_else(|| LmError::Parse {
                    line,
                    msg: format!("word {w:?} missing from symbol table"),
                }),
                None => Ok(symbols.add(w)),
            }
        };

        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut counts: Vec<usize> = Vec::new();
        let mut seen_data = false;
        for (lineno, line) in lines.by_ref() {
            if line.is_empty() {
                if seen_data && !counts.is_empty() {
                    break;
                }
                continue;
            }
            if line == "\\data\\" {
                seen_data = true;
                continue;
            }
            if !seen_data {
                continue;
            }
            let Some(rest) = line.strip_prefix("ngram ") else {
                return Err(LmError::Parse {
                    line: lineno,
                    msg: format!("expected `ngram k=count`, got {line:?}"),
                });
            };
            let (k, n) = rest
                .split_once('=')
                .and_then(|(k, n)| Some((k.trim().parse::<usize>().ok()?, n.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| LmError::Parse {
                    line: lineno,
                    msg: format!("bad count line {line:?}"),
                })?;
            if k != counts.len() + 1 {
                return Err(LmError::Parse {
                    line: lineno,
                    msg: format!("n-gram orders out of sequence at {k}"),
                });
            }
            counts.push(n);
        }
        if !seen_data {
            return Err(LmError::MissingSection("\\data\\".into()));
        }
        if counts.is_empty() {
            return Err(LmError::MissingSection("ngram counts".into()));
        }
        let order = counts.len();

        let mut entries: Vec<Vec<Entry>> = (0..order).map(|_| Vec::new()).collect();
        let mut current: Option<usize> = None;
        let mut ended = false;
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(k) = line
                .strip_prefix('\\')
                .and_then(|l| l.strip_suffix("-grams:"))
            {
                let k: usize = k.parse().map_err(|_| LmError::Parse {
                    line: lineno,
                    msg: format!("bad section header {line:?}"),
                })?;
                if k == 0 || k > order {
                    return Err(LmError::Parse {
                        line: lineno,
                        msg: format!("section for undeclared order {k}"),
                    });
                }
                current = Some(k);
                continue;
            }
            let Some(k) = current else {
                return Err(LmError::Parse {
                    line: lineno,
                    msg: "n-gram outside of a section".into(),
                });
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != k + 1 && fields.len() != k + 2 {
                return Err(LmError::Parse {
                    line: lineno,
                    msg: format!("expected {k}-gram line, got {line:?}"),
                });
            }
            let num = |f: &str| -> Result<f64> {
                f.parse::<f64>().ok().filter(|v| !v.is_nan()).ok_or_else(|| LmError::Parse {
                    line: lineno,
                    msg: format!("bad number {f:?}"),
                })
            };
            let logprob = num(fields[0])?;
            let words = fields[1..=k]
                .iter()
                .map(|w| intern(w, lineno))
                .collect::<Result<Vec<_>>>()?;
            let backoff = if fields.len() == k + 2 {
                Some(num(fields[k + 1])?)
            } else {
                None
            };
            entries[k - 1].push(Entry {
                words,
                cost: log10_to_cost(logprob),
                backoff: backoff.map(log10_to_cost),
            });
        }
        if !ended {
            return Err(LmError::MissingSection("\\end\\".into()));
        }
        for (k, (found, &declared)) in entries.iter().zip(&counts).enumerate() {
            if found.len() != declared {
                return Err(LmError::CountMismatch {
                    order: k + 1,
                    declared,
                    found: found.len(),
                });
            }
        }

        // Contexts: the empty history plus every n-gram below the top order.
        let mut contexts = vec![Context {
            history: Vec::new(),
            backoff: 0.0,
            parent: None,
            words: HashMap::new(),
        }];
        let mut context_ids: HashMap<Vec<Label>, u32> = HashMap::new();
        context_ids.insert(Vec::new(), 0);
        for level in entries.iter().take(order - 1) {
            for e in level {
                let id = contexts.len() as u32;
                if context_ids.insert(e.words.clone(), id).is_some() {
                    return Err(LmError::Duplicate(Self::render(&symbols, &e.words)));
                }
                contexts.push(Context {
                    history: e.words.clone(),
                    backoff: e.backoff.unwrap_or(0.0),
                    parent: None,
                    words: HashMap::new(),
                });
            }
        }
        let longest_suffix = |seq: &[Label]| -> u32 {
            (0..=seq.len())
                .find_map(|i| context_ids.get(&seq[i..]).copied())
                .expect("empty context always exists")
        };
        for c in contexts.iter_mut().skip(1) {
            c.parent = Some(longest_suffix(&c.history[1..]));
        }
        let unigrams: std::collections::HashSet<Label> =
            entries[0].iter().map(|e| e.words[0]).collect();
        for level in &entries {
            for e in level {
                let (history, word) = e.words.split_at(e.words.len() - 1);
                let word = word[0];
                if let Some(&missing) = e.words.iter().find(|w| !unigrams.contains(w)) {
                    return Err(LmError::MissingHistory(format!(
                        "{} (word {:?} has no unigram)",
                        Self::render(&symbols, &e.words),
                        symbols.symbol(missing).unwrap_or("?")
                    )));
                }
                let Some(&ctx) = context_ids.get(history) else {
                    return Err(LmError::MissingHistory(Self::render(&symbols, &e.words)));
                };
                let keep = e.words.len().min(order - 1);
                let next = longest_suffix(&e.words[e.words.len() - keep..]);
                let prev = contexts[ctx as usize].words.insert(word, (e.cost, next));
                if prev.is_some() {
                    return Err(LmError::Duplicate(Self::render(&symbols, &e.words)));
                }
            }
        }

        let bos = symbols.id(BOS).filter(|w| unigrams.contains(w));
        let eos = symbols.id(EOS).filter(|w| unigrams.contains(w));
        let unk = symbols.id(UNK).filter(|w| unigrams.contains(w));
        let start = match bos {
            Some(b) if order > 1 => context_ids.get(&vec![b]).copied().unwrap_or(0),
            _ => 0,
        };
        Ok(BackoffLm {
            order,
            symbols,
            contexts,
            context_ids,
            start: LmState(start),
            bos,
            eos,
            unk,
        })
    }

    fn render(symbols: &SymbolTable, words: &[Label]) -> String {
        words
            .iter()
            .map(|&w| symbols.symbol(w).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn num_states(&self) -> usize {
        self.contexts.len()
    }

    pub fn bos(&self) -> Option<Label> {
        self.bos
    }

    pub fn eos(&self) -> Option<Label> {
        self.eos
    }

    pub fn unk(&self) -> Option<Label> {
        self.unk
    }

    /// Word ids that appear as unigrams, excluding `<s>` and `</s>`.
    pub fn vocabulary(&self) -> Vec<Label> {
        let mut v: Vec<Label> = self.contexts[0]
            .words
            .keys()
            .copied()
            .filter(|&w| Some(w) != self.bos && Some(w) != self.eos)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, word: Label) -> bool {
        self.contexts[0].words.contains_key(&word)
    }

    pub fn history(&self, state: LmState) -> &[Label] {
        &self.contexts[state.0 as usize].history
    }

    pub fn state_of(&self, history: &[Label]) -> Option<LmState> {
        self.context_ids.get(history).map(|&c| LmState(c))
    }

    /// Sentence-begin state: `[<s>]` for models above unigram order.
    pub fn start(&self) -> LmState {
        self.start
    }

    /// Advances by one word, returning the successor and its cost.
    pub fn step(&self, state: LmState, word: Label) -> Result<(LmState, f64)> {
        let word = self.resolve(word)?;
        Ok(self.step_known(state, word))
    }

    fn resolve(&self, word: Label) -> Result<Label> {
        if word != EPSILON && self.contains(word) {
            Ok(word)
        } else if let Some(unk) = self.unk {
            Ok(unk)
        } else {
            Err(LmError::Oov(word))
        }
    }

    fn step_known(&self, state: LmState, word: Label) -> (LmState, f64) {
        let mut ctx = state.0;
        let mut acc = 0.0;
        loop {
            let c = &self.contexts[ctx as usize];
            if let Some(&(cost, next)) = c.words.get(&word) {
                return (LmState(next), acc + cost);
            }
            acc += c.backoff;
            ctx = c
                .parent
                .expect("every unigram is explicit in the empty context");
        }
    }

    /// Cost of ending the sentence in `state`; zero if the model has no `</s>`.
    pub fn final_cost(&self, state: LmState) -> f64 {
        match self.eos {
            Some(eos) => self.step_known(state, eos).1,
            None => 0.0,
        }
    }

    /// Cost of `<s> words </s>`.
    pub fn sentence_cost(&self, words: &[Label]) -> Result<f64> {
        let mut state = self.start();
        let mut total = 0.0;
        for &w in words {
            let (next, cost) = self.step(state, w)?;
            total += cost;
            state = next;
        }
        Ok(total + self.final_cost(state))
    }

    /// Explicit n-grams leaving `state`: `(word, cost, successor)`, sorted by word.
    pub fn explicit_arcs(&self, state: LmState) -> Vec<(Label, f64, LmState)> {
        let mut v: Vec<_> = self.contexts[state.0 as usize]
            .words
            .iter()
            .map(|(&w, &(c, n))| (w, c, LmState(n)))
            .collect();
        v.sort_by_key(|x| x.0);
        v
    }

    /// Backoff cost and target of `state`, or `None` for the empty history.
    pub fn backoff_arc(&self, state: LmState) -> Option<(f64, LmState)> {
        let c = &self.contexts[state.0 as usize];
        c.parent.map(|p| (c.backoff, LmState(p)))
    }
}
