//! Acoustic log-likelihood matrices and a synthetic stand-in acoustic model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::fst::{coaccessible, distance_to_final, Label, Path, Wfst, EPSILON};
use crate::semiring::DualCost;

/// Loglike offset of labels off the sampled path.
pub const NOISE_MARGIN: f64 = 4.0;
pub const DEFAULT_FRAME_SHIFT: f64 = 0.01;

/// Frames longer than this are steered to the nearest final state.
const MAX_SAMPLED_FRAMES: usize = 400;
const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Error)]
pub enum AmError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("frame {frame} out of range (T = {frames})")]
    FrameRange { frame: usize, frames: usize },
    #[error("label {label} out of range (1..={labels})")]
    LabelRange { label: Label, labels: usize },
    #[error("graph has no accepting path with at least one frame")]
    NoPath,
    #[error("invalid noise spread {0}")]
    Sigma(f64),
}

pub type Result<T> = std::result::Result<T, AmError>;

/// `T x L` matrix of natural-log likelihoods; label `i` is column `i - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLikelihoods {
    num_frames: usize,
    num_labels: usize,
    values: Vec<f64>,
    pub frame_shift: f64,
}

impl LogLikelihoods {
    pub fn new(num_frames: usize, num_labels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_frames * num_labels {
            return Err(AmError::Parse {
                line: 0,
                msg: format!(
                    "{} values for a {num_frames}x{num_labels} matrix",
                    values.len()
                ),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AmError::Parse {
                line: i / num_labels.max(1) + 1,
                msg: "non-finite value".into(),
            });
        }
        Ok(LogLikelihoods {
            num_frames,
            num_labels,
            values,
            frame_shift: DEFAULT_FRAME_SHIFT,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn value(&self, frame: usize, label: Label) -> f64 {
        self.values[frame * self.num_labels + label as usize - 1]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.num_labels..(frame + 1) * self.num_labels]
    }

    /// Audio duration in seconds.
    pub fn duration(&self) -> f64 {
        self.num_frames as f64 * self.frame_shift
    }

    /// `-scale * loglike`, range-checked.
    pub fn acoustic_cost(&self, frame: usize, label: Label, scale: f64) -> Result<f64> {
        if frame >= self.num_frames {
            return Err(AmError::FrameRange {
                frame,
                frames: self.num_frames,
            });
        }
        if label == EPSILON || label as usize > self.num_labels {
            return Err(AmError::LabelRange {
                label,
                labels: self.num_labels,
            });
        }
        Ok(self.cost(frame, label, scale))
    }

    /// Unchecked variant for the decoder inner loop.
    #[inline]
    pub fn cost(&self, frame: usize, label: Label, scale: f64) -> f64 {
        if scale == 0.0 {
            return 0.0;
        }
        -scale * self.value(frame, label)
    }

    /// CSV with a `frames,labels` count header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.num_frames, self.num_labels);
        for t in 0..self.num_frames {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parses the CSV matrix format.
///
/// The header is either the literal `frames,labels` or the two counts
/// themselves; in the latter case the body is checked against them.
pub fn load_loglikes(text: &str) -> Result<LogLikelihoods> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or(AmError::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let declared = parse_header(header)?;
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut frames = 0;
    for (lineno, line) in lines {
        let row = line
            .split(',')
            .map(|f| {
                let v: f64 = f.trim().parse().map_err(|_| AmError::Parse {
                    line: lineno,
                    msg: format!("bad number {f:?}"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(AmError::Parse {
                        line: lineno,
                        msg: "non-finite value".into(),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(AmError::Parse {
                    line: lineno,
                    msg: format!("ragged row: {} columns, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        frames += 1;
    }
    let labels = width.unwrap_or(0);
    if let Some((t, l)) = declared {
        if (t, l) != (frames, labels) && !(t == 0 && frames == 0) {
            return Err(AmError::Parse {
                line: 1,
                msg: format!("header says {t}x{l}, body is {frames}x{labels}"),
            });
        }
        if frames == 0 {
            return LogLikelihoods::new(0, l, Vec::new());
        }
    }
    LogLikelihoods::new(frames, labels, values)
}

fn parse_header(header: &str) -> Result<Option<(usize, usize)>> {
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields == ["frames", "labels"] {
        return Ok(None);
    }
    match fields.as_slice() {
        [t, l] => match (t.parse(), l.parse()) {
            (Ok(t), Ok(l)) => Ok(Some((t, l))),
            _ => Err(AmError::Parse {
                line: 1,
                msg: format!("bad header {header:?}"),
            }),
        },
        _ => Err(AmError::Parse {
            line: 1,
            msg: format!("bad header {header:?}"),
        }),
    }
}

/// Synthetic acoustic scores for one utterance.
///
/// Takes `true_path` or samples an accepting path of `graph` (choices weighted
/// by `exp(-graph cost)`, needing at least one emitting arc). On each frame the
/// path's label gets mean 0 and every other label mean `-NOISE_MARGIN`, plus
/// Gaussian noise of spread `sigma`. Returns the matrix and the path's words.
pub fn synthesize_loglikes(
    graph: &Wfst,
    seed: u64,
    sigma: f64,
    true_path: Option<&Path>,
) -> Result<(LogLikelihoods, Vec<Label>)> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(AmError::Sigma(sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = match true_path {
        Some(p) => p.clone(),
        None => sample_path(graph, &mut rng)?,
    };
    let frames = path.emitted();
    if frames.is_empty() {
        return Err(AmError::NoPath);
    }
    let num_labels = (graph.max_ilabel() as usize).max(frames.iter().copied().max().unwrap_or(0) as usize);
    let noise = Normal::new(0.0, sigma).map_err(|_| AmError::Sigma(sigma))?;
    let mut values = Vec::with_capacity(frames.len() * num_labels);
    for &label in &frames {
        for col in 1..=num_labels {
            let mean = if col == label as usize { 0.0 } else { -NOISE_MARGIN };
            values.push(mean + noise.sample(&mut rng));
        }
    }
    let ll = LogLikelihoods::new(frames.len(), num_labels, values)?;
    Ok((ll, path.words()))
}

/// Random accepting path with at least one emitting arc.
pub fn sample_path(graph: &Wfst, rng: &mut ChaCha8Rng) -> Result<Path> {
    let start = graph.start().ok_or(AmError::NoPath)?;
    let live = coaccessible(graph);
    if !live[start] {
        return Err(AmError::NoPath);
    }
    let dist = distance_to_final(graph).map_err(|_| AmError::NoPath)?;
    for _ in 0..MAX_RESAMPLES {
        let mut path = Path {
            cost: DualCost::one(),
            ilabels: Vec::new(),
            olabels: Vec::new(),
            states: vec![start],
        };
        let mut s = start;
        let mut emitted = 0usize;
        let mut steps = 0usize;
        loop {
            steps += 1;
            let steer = emitted >= MAX_SAMPLED_FRAMES || steps > 8 * MAX_SAMPLED_FRAMES;
            let arcs: Vec<_> = graph
                .arcs(s)
                .iter()
                .filter(|a| live[a.nextstate])
                .collect();
            let stop = graph.final_weight(s);
            let choice = if steer {
                // Greedy completion along the cheapest continuation.
                let mut best = stop.map(|w| (w.total(), None));
                for (i, a) in arcs.iter().enumerate() {
                    if a.nextstate == s {
                        continue;
                    }
                    let c = a.weight.times(dist[a.nextstate]).total();
                    if best.is_none_or(|(b, _)| c < b) {
                        best = Some((c, Some(i)));
                    }
                }
                best.map(|(_, i)| i)
            } else {
                let weights: Vec<f64> = stop
                    .iter()
                    .map(|w| (-w.graph).exp())
                    .chain(arcs.iter().map(|a| (-a.weight.graph).exp()))
                    .collect();
                let sum: f64 = weights.iter().sum();
                if !(sum > 0.0 && sum.is_finite()) {
                    None
                } else {
                    let mut x = rng.random::<f64>() * sum;
                    let mut pick = weights.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        if x < *w {
                            pick = i;
                            break;
                        }
                        x -= w;
                    }
                    match (stop.is_some(), pick) {
                        (true, 0) => Some(None),
                        (true, i) => Some(Some(i - 1)),
                        (false, i) => Some(Some(i)),
                    }
                }
            };
            match choice {
                Some(None) => {
                    path.cost = path.cost.times(stop.expect("final"));
                    break;
                }
                Some(Some(i)) => {
                    let a = arcs[i];
                    path.cost = path.cost.times(a.weight);
                    path.ilabels.push(a.ilabel);
                    path.olabels.push(a.olabel);
                    path.states.push(a.nextstate);
                    if a.ilabel != EPSILON {
                        emitted += 1;
                    }
                    s = a.nextstate;
                }
                None => return Err(AmError::NoPath),
            }
        }
        if emitted > 0 {
            return Ok(path);
        }
    }
    Err(AmError::NoPath)
}
