use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prescient::cli::{
    cmd_cost, cmd_eval, cmd_plotdata, cmd_score, cmd_stream, cmd_synth, cmd_train, Checkpoint, RunConfig, Strategy,
    SynthRequest, CHECKPOINT_FILE, METRICS_FILE, OUT_ENV, PLOT_FILE, SCORES_FILE,
};
use prescient::data::SynthKind;
use prescient::detectors::DetectorKind;
use prescient::models::Direction;
use prescient::{Error, Result};

/// Proactive multivariate time-series anomaly detection.
#[derive(Parser)]
#[command(name = "prescient", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for initialization, shuffling, dropout, detectors and generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct DataArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Manifest file mapping dataset names to files.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Number of Top-K flags; defaults to the label count.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// gmm, ecod or svdd.
    #[arg(long)]
    detector: Option<DetectorKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and calibrate its thresholds.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        direction: Option<Direction>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Score the test split, writing `index,score,flag`.
    Score {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Compute every metric for a score file.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Read rows from standard input and emit next-step proactive events.
    Stream {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate a synthetic train/test dataset.
    Synth {
        kind: SynthKind,
        #[arg(long, default_value_t = 5000)]
        length: usize,
        /// Length of the train split; defaults to `--length`.
        #[arg(long)]
        train_length: Option<usize>,
        #[arg(long, default_value_t = 4)]
        features: usize,
        #[arg(long, default_value_t = 0.03)]
        rate: f64,
    },
    /// Print the per-term multiplication counts of one forward pass.
    Cost {
        #[arg(long, default_value_t = 4)]
        features: usize,
        /// How many of the features are binary.
        #[arg(long, default_value_t = 0)]
        discrete: usize,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
    /// Join a score file with labels as `index,score,flag,label`.
    Plotdata {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    let data = &mut cfg.data;
    for (slot, v) in [
        (&mut data.train, &d.train),
        (&mut data.test, &d.test),
        (&mut data.labels, &d.labels),
        (&mut data.manifest, &d.manifest),
    ] {
        if v.is_some() {
            slot.clone_from(v);
        }
    }
    if d.dataset.is_some() {
        data.dataset.clone_from(&d.dataset);
    }
}

fn apply_strategy(cfg: &mut RunConfig, s: &StrategyArgs) {
    if let Some(v) = s.strategy {
        cfg.score.strategy = v;
    }
    if s.k.is_some() {
        cfg.score.k = s.k;
    }
    if s.threshold.is_some() {
        cfg.score.threshold = s.threshold;
    }
    if let Some(k) = s.detector {
        cfg.score.detector.kind = k;
    }
}

fn checkpoint_path(cfg: &RunConfig, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| cfg.output_dir().join(CHECKPOINT_FILE))
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Train { data, direction, epochs, strategy } => {
            apply_data(&mut cfg, data);
            apply_strategy(&mut cfg, strategy);
            if let Some(d) = direction {
                cfg.model.direction = *d;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
            }
            if cli.out.is_some() {
                cfg.run.out.clone_from(&cli.out);
            }
            let outcome = cmd_train(&cfg, |e, l| eprintln!("epoch {e} loss {l:.6}"))?;
            println!("{}", outcome.dir.display());
        }
        Command::Score { checkpoint, data, strategy } => {
            apply_data(&mut cfg, data);
            apply_strategy(&mut cfg, strategy);
            let ckpt = checkpoint_path(&cfg, checkpoint);
            let dir = cli.out.clone().unwrap_or_else(|| parent_dir(&ckpt));
            let outcome = cmd_score(&cfg, &ckpt, &dir.join(SCORES_FILE))?;
            let flagged = outcome.rows.iter().filter(|r| r.flag != 0).count();
            eprintln!("scored {} timestamps, {flagged} flagged", outcome.rows.len());
            println!("{}", outcome.path.display());
        }
        Command::Eval { scores, labels } => {
            let labels = labels
                .clone()
                .or(cfg.data_paths()?.labels)
                .ok_or_else(|| Error::Config("eval needs --labels or data.labels".into()))?;
            let dir = cli.out.clone().unwrap_or_else(|| parent_dir(scores));
            let report = cmd_eval(scores, &labels, Some(&dir.join(METRICS_FILE)))?;
            println!("{report}");
        }
        Command::Stream { checkpoint } => {
            let ckpt = Checkpoint::load(&checkpoint_path(&cfg, checkpoint))?;
            let stdin = io::stdin().lock();
            let stdout = BufWriter::new(io::stdout().lock());
            let stats = cmd_stream(&ckpt, stdin, stdout, io::stderr())?;
            eprintln!("{stats}");
        }
        Command::Synth { kind, length, train_length, features, rate } => {
            let seed = cli.seed.unwrap_or(0);
            let out = cli.out.clone().unwrap_or_else(|| {
                let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from);
                root.join(format!("{kind}-s{seed}"))
            });
            let manifest = cmd_synth(&SynthRequest {
                kind: *kind,
                length: *length,
                train_length: *train_length,
                features: *features,
                rate: *rate,
                seed,
                out,
            })?;
            println!("{}", manifest.display());
        }
        Command::Cost { features, discrete, window, horizon, batch } => {
            if discrete > features {
                return Err(Error::Config(format!("{discrete} discrete features out of {features}")));
            }
            if let Some(w) = window {
                cfg.model.window = *w;
            }
            if let Some(h) = horizon {
                cfg.model.horizon = *h;
            }
            let split = features - discrete;
            let spec = cfg.model.spec((0..split).collect(), (split..*features).collect())?;
            println!("{}", cmd_cost(&spec, *batch)?);
        }
        Command::Plotdata { scores, labels } => {
            let labels = labels.clone().or(cfg.data_paths()?.labels);
            let out = cli.out.clone().unwrap_or_else(|| parent_dir(scores)).join(PLOT_FILE);
            let n = cmd_plotdata(scores, labels.as_deref(), &out)?;
            eprintln!("wrote {n} rows");
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
