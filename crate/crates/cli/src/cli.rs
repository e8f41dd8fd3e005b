use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jetssm_core::nn::{ModelKind, NormKind};
use jetssm_core::{Error, Result};

use crate::commands;
use crate::config::RunConfig;
use crate::io::write_json_atomic;
use crate::plot;
use crate::stream::stream_predict;

#[derive(Debug, Parser)]
#[command(name = "jetssm", version, about = "Erosion-depth regression from water-jet audio")]
pub struct Cli {
    /// Seed for every random choice (falls back to JETSSM_SEED, then a logged random seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic recordings: WAV, profile CSV and metadata JSON per trial.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the aligned log-mel features of one WAV as CSV.
    Featurize {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = jetssm_core::dataset::TRIAL_FRAMES)]
        frames: usize,
    },
    /// Train a model on a directory of recordings.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>.history.json`.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Score checkpoints on the test halves of a directory of recordings.
    Eval {
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Accuracy threshold in µm.
        #[arg(long)]
        tau: Option<f64>,
        /// Write the report(s) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a CSV comparing all four model kinds, training any kind
        /// without a checkpoint.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Run an S4D checkpoint recurrently over a WAV and print CSV rows as they are produced.
    Stream {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Samples read per chunk.
        #[arg(long, default_value_t = 4096)]
        chunk: usize,
    },
    /// Random hyperparameter search; writes a leaderboard and the best checkpoint.
    Search {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// SVG plots with CSV twins.
    Plot {
        #[command(subcommand)]
        kind: PlotKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Pooled dwell depth against standoff with error bars.
    Depth {
        #[arg(long)]
        data: PathBuf,
        /// Output path without extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted against true depth for one profile column over the test half.
    Overlay {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value_t = 35)]
        column: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Batch,
    Layer,
}

/// Model and training overrides.
#[derive(Clone, Debug, Args)]
pub struct HyperArgs {
    /// s4d, gru, mlp_shallow or mlp_deep.
    #[arg(long, default_value = "s4d")]
    pub model: ModelKind,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub state: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub mlp_depth: Option<usize>,
    #[arg(long)]
    pub gru_layers: Option<usize>,
    /// Chance that a training window sees the profile columns.
    #[arg(long)]
    pub profile_visible: Option<f64>,
}

impl HyperArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        let t = &mut cfg.train;
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.dropout {
            t.dropout = v;
        }
        if let Some(v) = self.window {
            t.window_length = v;
        }
        if let Some(v) = self.stride {
            t.stride = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.profile_visible {
            t.profile_visible_prob = v;
        }
        if let Some(v) = self.hidden {
            m.hidden_dim = v;
        }
        if let Some(v) = self.blocks {
            m.n_blocks = v;
        }
        if let Some(v) = self.state {
            m.n_state = v;
        }
        if let Some(v) = self.mlp_depth {
            m.mlp_depth = v;
        }
        if let Some(v) = self.gru_layers {
            m.gru_layers = v;
        }
        if let Some(v) = self.norm {
            m.norm_kind = match v {
                NormArg::Batch => NormKind::BatchOverTime,
                NormArg::Layer => NormKind::Layer,
            };
        }
    }
}

/// Process exit status for an error: 2 validation, 3 I/O, 4 incompatibility.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::Incompatible(_) => 4,
        _ => 2,
    }
}

fn prepare(config: Option<&std::path::Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    cfg.resolve_seed(seed)?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = prepare(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Synth { out, trials, workers } => {
            if let Some(n) = trials {
                cfg.trials = n;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let stems = commands::synth(&cfg, &out)?;
            println!("wrote {} trial(s) to {}", stems.len(), out.display());
        }
        Command::Featurize { wav, out, frames } => {
            commands::featurize_file(&cfg, &wav, frames, &out)?;
        }
        Command::Train { data, out, history, hyper } => {
            hyper.apply(&mut cfg);
            let history = history.unwrap_or_else(|| commands::history_path_for(&out));
            commands::train_cmd(&cfg, hyper.model, &data, &out, &history)?;
            println!("wrote {} and {}", out.display(), history.display());
        }
        Command::Eval { checkpoints, data, tau, out, compare, hyper } => {
            hyper.apply(&mut cfg);
            if let Some(t) = tau {
                cfg.tau_um = t;
            }
            let (reports, rows) = commands::eval_cmd(&cfg, &checkpoints, &data, compare.as_deref())?;
            for r in &reports {
                println!("{}", commands::summarize(r));
            }
            for r in &rows {
                println!(
                    "{:<12} {:<10} accuracy {:>7.2}% mse {:.3}",
                    r.model, r.source, r.accuracy_pct, r.mse
                );
            }
            if let Some(path) = out {
                match reports.as_slice() {
                    [one] => write_json_atomic(&path, one)?,
                    many => write_json_atomic(&path, &many)?,
                }
            }
        }
        Command::Stream { checkpoint, wav, chunk } => {
            let ck = crate::checkpoint::load(&checkpoint)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let io_err = |e| Error::io("<stdout>", e);
            let mut line = String::new();
            stream_predict(&ck, &wav, chunk, |row| {
                line.clear();
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    line.push_str(&v.to_string());
                }
                writeln!(lock, "{line}").map_err(io_err)
            })?;
            lock.flush().map_err(io_err)?;
        }
        Command::Search { data, out, trials, workers, tau, hyper } => {
            hyper.apply(&mut cfg);
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(t) = tau {
                cfg.tau_um = t;
            }
            let budget = trials.unwrap_or(cfg.space.n_trials);
            let outcome = commands::search_cmd(&cfg, hyper.model, &data, budget, &out)?;
            let best = &outcome.leaderboard[0];
            println!(
                "best trial {} of {}: accuracy {:.2}% mse {:.3}; wrote {}",
                best.trial,
                outcome.leaderboard.len(),
                best.accuracy_pct,
                best.mse,
                out.display()
            );
        }
        Command::Plot { kind } => match kind {
            PlotKind::Depth { data, out } => {
                let stats = plot::plot_depth(&data, &out)?;
                for s in stats {
                    println!(
                        "{} mm: {:.1} ± {:.1} um (n = {})",
                        s.standoff_mm, s.mean_um, s.std_um, s.count
                    );
                }
            }
            PlotKind::Overlay { checkpoints, data, trial, column, out } => {
                plot::plot_overlay(&checkpoints, &data, trial, column, &out)?;
                println!("wrote {}.svg and {}.csv", out.display(), out.display());
            }
        },
    }
    Ok(())
}
