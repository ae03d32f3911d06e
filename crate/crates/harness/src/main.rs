use std::path::PathBuf;
use std::process::ExitCode;

use asyncdec::decoder::{AsyncOptions, DecodeOptions};
use asyncdec_harness::{
    compare_runs, make_fixture_suite, run_experiment, run_sweep, Corpus, ExperimentConfig, HarnessError, Mode,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asyncdec", version, about = "Lattice decoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a corpus and write per-utterance and summary reports.
    Run(RunArgs),
    /// Decode a corpus at several beams (and offsets) and write sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        beams: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        offsets: Vec<usize>,
    },
    /// Diff two report directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the diff here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the canonical fixture suite.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    hclg: PathBuf,
    /// Word table for the graph's output labels.
    #[arg(long)]
    words: Option<PathBuf>,
    #[arg(long)]
    lm_small: Option<PathBuf>,
    #[arg(long)]
    lm_large: Option<PathBuf>,
    /// Log-likelihood CSV or a directory of them.
    #[arg(long, conflicts_with = "synth_count")]
    loglikes: Option<PathBuf>,
    #[arg(long)]
    synth_count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    synth_seed: u64,
    #[arg(long, default_value_t = 3.0)]
    synth_sigma: f64,
    #[arg(long, default_value_t = DecodeOptions::default().beam)]
    beam: f64,
    #[arg(long, default_value_t = DecodeOptions::default().max_active)]
    max_active: usize,
    #[arg(long, default_value_t = DecodeOptions::default().lattice_beam)]
    lattice_beam: f64,
    #[arg(long, default_value_t = DecodeOptions::default().acoustic_scale)]
    acoustic_scale: f64,
    #[arg(long, default_value_t = AsyncOptions::default().offset)]
    offset: usize,
    #[arg(long, default_value_t = AsyncOptions::default().front_batch)]
    front_batch: usize,
    /// Defaults to the lattice beam.
    #[arg(long)]
    backfill_beam: Option<f64>,
    #[arg(long, default_value_t = DecodeOptions::default().prune_interval)]
    prune_interval: usize,
    /// Record token survival up to this offset (synchronous modes).
    #[arg(long, default_value_t = 0)]
    survival_window: usize,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let corpus = match (&self.loglikes, self.synth_count) {
            (Some(p), _) => Corpus::Files(p.clone()),
            (None, Some(count)) => Corpus::Synth {
                count,
                seed: self.synth_seed,
                sigma: self.synth_sigma,
            },
            (None, None) => return Err(HarnessError::Config("give --loglikes or --synth-count".into())),
        };
        let mut cfg = ExperimentConfig::new(self.mode, self.hclg.clone(), corpus, self.out.clone());
        cfg.words = self.words.clone();
        cfg.lm_small = self.lm_small.clone();
        cfg.lm_large = self.lm_large.clone();
        cfg.decode = DecodeOptions {
            beam: self.beam,
            max_active: self.max_active,
            lattice_beam: self.lattice_beam,
            acoustic_scale: self.acoustic_scale,
            prune_interval: self.prune_interval,
            survival_window: self.survival_window,
        };
        cfg.offset = self.offset;
        cfg.front_batch = self.front_batch;
        cfg.backfill_beam = self.backfill_beam;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<String, HarnessError> {
    match cli.command {
        Command::Run(args) => {
            let summary = run_experiment(&args.config()?)?;
            Ok(serde_json::to_string_pretty(&summary)?)
        }
        Command::Sweep { run, beams, offsets } => {
            let points = run_sweep(&run.config()?, &beams, &offsets)?;
            Ok(serde_json::to_string_pretty(&points)?)
        }
        Command::Compare { a, b, out } => {
            let report = serde_json::to_string_pretty(&compare_runs(&a, &b)?)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &report).map_err(|source| HarnessError::Io { path, source })?;
                    Ok(String::new())
                }
                None => Ok(report),
            }
        }
        Command::Fixtures { out, seed } => {
            let files = make_fixture_suite(&out, seed)?;
            Ok(format!("wrote {} files to {}", files.len(), out.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            if !text.is_empty() {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
