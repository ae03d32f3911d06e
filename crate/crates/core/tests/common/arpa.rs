//! Independent ARPA scorer working on raw strings, used as a test oracle.

use std::collections::HashMap;

pub struct ArpaOracle {
    pub order: usize,
    /// n-gram words → (log10 prob, log10 backoff).
    table: HashMap<Vec<String>, (f64, f64)>,
}

impl ArpaOracle {
    pub fn parse(text: &str) -> Self {
        let mut table = HashMap::new();
        let mut n = 0;
        let mut order = 0;
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with("ngram ") || line == "\\data\\" || line == "\\end\\" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('\\') {
                n = rest.split('-').next().unwrap().parse().unwrap();
                order = order.max(n);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let logp: f64 = fields[0].parse().unwrap();
            let words: Vec<String> = fields[1..=n].iter().map(|w| w.to_string()).collect();
            let bow = fields.get(n + 1).map_or(0.0, |b| b.parse().unwrap());
            table.insert(words, (logp, bow));
        }
        ArpaOracle { order, table }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.table.contains_key(&vec![word.to_string()])
    }

    /// log10 P(w | history) by the backoff recursion.
    fn log10_prob(&self, history: &[String], w: &str) -> f64 {
        let mut gram = history.to_vec();
        gram.push(w.to_string());
        if let Some(&(p, _)) = self.table.get(&gram) {
            return p;
        }
        assert!(!history.is_empty(), "unigram {w} missing");
        let bow = self.table.get(history).map_or(0.0, |e| e.1);
        bow + self.log10_prob(&history[1..], w)
    }

    /// Negated natural-log score of `<s> words </s>`.
    pub fn sentence_cost(&self, words: &[&str]) -> f64 {
        let mut seq: Vec<String> = vec!["<s>".into()];
        let mapped = words.iter().map(|w| if self.contains(w) { w.to_string() } else { "<unk>".into() });
        seq.extend(mapped);
        let with_eos = self.contains("</s>");
        if with_eos {
            seq.push("</s>".into());
        }
        let mut total = 0.0;
        for i in 1..seq.len() {
            let lo = i.saturating_sub(self.order - 1);
            total += self.log10_prob(&seq[lo..i], &seq[i]);
        }
        -total * std::f64::consts::LN_10
    }
}
