use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::data::{
    infer_schema, load_csv, load_labels, make_windows, normalize, write_csv, write_labels, DatasetEntry, Manifest,
    SynthKind, SynthOptions, TimeSeries,
};
use crate::detectors::FittedDetector;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport};
use crate::models::{estimate_cost, CostReport, Direction, Model, ModelSpec};
use crate::scoring::{
    backward_score, calibrate, flatten_predictions, forward_score, log_stabilize, predict_windows, quantile,
    threshold_flags, topk_flags, Alignment, Calibration, ScoreSeries, StreamDetector,
};
use crate::training::train_with;

use super::checkpoint::Checkpoint;
use super::config::{RunConfig, Strategy};

pub const CHECKPOINT_FILE: &str = "model.prsc";
pub const LOSS_LOG_FILE: &str = "loss.log";
pub const CONFIG_FILE: &str = "config.toml";
pub const SCORES_FILE: &str = "scores.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const PLOT_FILE: &str = "plot.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::config(format!("no {what} file given; set data.{what} or a manifest")))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub checkpoint: Checkpoint,
    pub epoch_losses: Vec<f64>,
}

/// Fits the feature schema and the model on the train split, calibrates
/// detection thresholds on it and writes `model.prsc`, `loss.log` and the
/// resolved `config.toml` into the run directory.
pub fn cmd_train(cfg: &RunConfig, mut on_epoch: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    cfg.train.validate()?;
    let paths = cfg.data_paths()?;
    let train_path = required(&paths.train, "train")?;
    let raw = load_csv(train_path, None, &cfg.load_options())?;
    let schema = infer_schema(&raw, cfg.max_distinct());
    let spec = cfg.model.spec_for(&schema)?;
    let series = normalize(&raw, &schema)?;
    let model = Model::new(spec.clone())?;
    let windows = make_windows(&series, spec.window, spec.horizon, spec.direction)?;
    let mut params = model.init_params(cfg.train.seed);
    let log = train_with(&model, &mut params, &windows, &cfg.train, &mut on_epoch)?;
    params.round_to_f32();
    let calibration = calibrate(&model, &params, &windows, &cfg.score.detector, cfg.score.quantile)?;
    let checkpoint = Checkpoint { spec, schema, params, calibration: Some(calibration) };
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    let log_path = dir.join(LOSS_LOG_FILE);
    std::fs::write(&log_path, log.to_string()).map_err(|e| Error::io(&log_path, e))?;
    resolved(cfg)?.save(&dir.join(CONFIG_FILE))?;
    Ok(TrainOutcome { dir, checkpoint, epoch_losses: log.epoch_losses })
}

/// `cfg` with absolute data paths.
fn resolved(cfg: &RunConfig) -> Result<RunConfig> {
    let mut out = cfg.clone();
    let d = &mut out.data;
    for p in [&mut d.manifest, &mut d.train, &mut d.test, &mut d.labels].into_iter().flatten() {
        *p = std::path::absolute(&*p).map_err(|e| Error::io(&*p, e))?;
    }
    Ok(out)
}

/// One scored timestamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreRow {
    pub index: usize,
    pub score: f64,
    pub flag: u8,
}

#[derive(Clone, Debug)]
pub struct ScoreOutcome {
    pub path: PathBuf,
    pub rows: Vec<ScoreRow>,
}

fn error_series(model: &Model, ckpt: &Checkpoint, series: &TimeSeries) -> Result<ScoreSeries> {
    let spec = &ckpt.spec;
    let windows = make_windows(series, spec.window, spec.horizon, spec.direction)?;
    match spec.direction {
        Direction::Forward => forward_score(model, &ckpt.params, &windows),
        Direction::Backward => backward_score(model, &ckpt.params, &windows),
    }
}

fn detector_series(
    model: &Model,
    ckpt: &Checkpoint,
    cfg: &RunConfig,
    series: &TimeSeries,
    calibration: &Calibration,
) -> Result<(ScoreSeries, f64)> {
    let spec = &ckpt.spec;
    let windows = make_windows(series, spec.window, spec.horizon, spec.direction)?;
    let flat = flatten_predictions(&predict_windows(model, &ckpt.params, &windows)?)?;
    let (detector, tau) = if calibration.detector.kind() == cfg.score.detector.kind {
        (calibration.detector.clone(), calibration.proactive_threshold)
    } else {
        let paths = cfg.data_paths()?;
        let train_path = required(&paths.train, "train")?;
        let train = normalize(&load_csv(train_path, None, &cfg.load_options())?, &ckpt.schema)?;
        let train_windows = make_windows(&train, spec.window, spec.horizon, spec.direction)?;
        let train_flat = flatten_predictions(&predict_windows(model, &ckpt.params, &train_windows)?)?;
        let det = FittedDetector::fit(&cfg.score.detector, &train_flat)?;
        let tau = quantile(&det.score_rows(&train_flat)?, cfg.score.quantile)?;
        (det, tau)
    };
    let (alignment, first) = match spec.direction {
        Direction::Forward => (Alignment::ForecastTarget, windows.anchor(0)),
        Direction::Backward => (Alignment::WindowEnd, windows.anchor(0) - 1),
    };
    let scores = detector.score_rows(&flat)?;
    Ok((ScoreSeries { scores, alignment, first }, tau))
}

/// Scores the test split with a trained checkpoint and writes
/// `index,score,flag` rows to `out`.
pub fn cmd_score(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<ScoreOutcome> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.model()?;
    let paths = cfg.data_paths()?;
    let test_path = required(&paths.test, "test")?;
    let raw = load_csv(test_path, None, &cfg.load_options())?;
    if raw.n_features() != ckpt.schema.n_features {
        return Err(Error::data(format!(
            "{} has {} features but the checkpoint was trained on {}",
            test_path.display(),
            raw.n_features(),
            ckpt.schema.n_features
        )));
    }
    let series = normalize(&raw, &ckpt.schema)?;
    let calibration =
        || ckpt.calibration.as_ref().ok_or_else(|| Error::Checkpoint("checkpoint has no calibration".into()));
    let (scored, flags) = match cfg.score.strategy {
        Strategy::Topk => {
            let scored = log_stabilize(&error_series(&model, &ckpt, &series)?)?;
            let k = match (cfg.score.k, &paths.labels) {
                (Some(k), _) => k,
                (None, Some(lp)) => {
                    let labels = load_labels(lp)?;
                    scored.aligned(&labels)?.iter().map(|&l| l as usize).sum()
                }
                (None, None) => return Err(Error::config("topk scoring needs labels or an explicit k")),
            };
            let flags = topk_flags(&scored.scores, k);
            (scored, flags)
        }
        Strategy::Threshold => {
            let scored = error_series(&model, &ckpt, &series)?;
            let tau = match cfg.score.threshold {
                Some(t) => t,
                None => calibration()?.reactive_threshold,
            };
            let flags = threshold_flags(&scored.scores, tau);
            (scored, flags)
        }
        Strategy::Detector => {
            let (scored, tau) = detector_series(&model, &ckpt, cfg, &series, calibration()?)?;
            let tau = cfg.score.threshold.unwrap_or(tau);
            let flags = threshold_flags(&scored.scores, tau);
            (scored, flags)
        }
    };
    let rows: Vec<ScoreRow> = scored
        .timestamps()
        .zip(&scored.scores)
        .zip(&flags)
        .map(|((index, &score), &flag)| ScoreRow { index, score, flag })
        .collect();
    write_scores(out, &rows)?;
    Ok(ScoreOutcome { path: out.to_path_buf(), rows })
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "index,score,flag").map_err(io)?;
    for r in rows {
        writeln!(w, "{},{},{}", r.index, r.score, r.flag).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a file written by [`write_scores`].
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("index")) {
            continue;
        }
        let bad = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", cells.len())));
        }
        let index = cells[0].parse().map_err(|_| bad(format!("bad index {:?}", cells[0])))?;
        let score = cells[1].parse().map_err(|_| bad(format!("bad score {:?}", cells[1])))?;
        let flag = match cells[2] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("flag {other:?} is not 0 or 1"))),
        };
        rows.push(ScoreRow { index, score, flag });
    }
    Ok(rows)
}

fn labels_for(rows: &[ScoreRow], labels: &[u8]) -> Result<Vec<u8>> {
    rows.iter()
        .map(|r| {
            labels.get(r.index).copied().ok_or_else(|| {
                Error::data(format!(
                    "scores cover indices {}..={} but there are only {} labels",
                    rows.first().map_or(0, |r| r.index),
                    rows.last().map_or(0, |r| r.index),
                    labels.len()
                ))
            })
        })
        .collect()
}

/// Computes every metric for a score file against per-timestamp labels.
/// Labels are matched to scores by timestamp index, so the boundary rows the
/// model cannot score are trimmed.
pub fn cmd_eval(scores: &Path, labels: &Path, out: Option<&Path>) -> Result<MetricReport> {
    let rows = read_scores(scores)?;
    if rows.is_empty() {
        return Err(Error::data(format!("{} has no score rows", scores.display())));
    }
    if rows.windows(2).any(|w| w[1].index != w[0].index + 1) {
        return Err(Error::data(format!("{} indices are not consecutive", scores.display())));
    }
    let aligned = labels_for(&rows, &load_labels(labels)?)?;
    let s: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let f: Vec<u8> = rows.iter().map(|r| r.flag).collect();
    let report = evaluate(&s, &f, &aligned)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        writeln!(w, "{report}").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

/// Per-row latency summary of a stream session.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StreamStats {
    pub rows: usize,
    pub skipped: usize,
    pub emitted: usize,
    pub total: Duration,
    pub max: Duration,
}

impl StreamStats {
    pub fn mean(&self) -> Duration {
        if self.rows == 0 {
            Duration::ZERO
        } else {
            self.total / self.rows as u32
        }
    }
}

impl std::fmt::Display for StreamStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rows = {}, skipped = {}, emitted = {}, latency_mean_us = {:.1}, latency_max_us = {:.1}",
            self.rows,
            self.skipped,
            self.emitted,
            self.mean().as_secs_f64() * 1e6,
            self.max.as_secs_f64() * 1e6
        )
    }
}

fn parse_row(line: &str) -> Option<Vec<f64>> {
    line.split(',').map(|c| c.trim().parse::<f64>().ok()).collect()
}

/// Reads comma-separated rows from `input` and, after each row `t`, writes
/// `t+1,score,flag` for the next timestamp to `output` and flushes it before
/// the next row is read. An unparseable first line is taken as a header.
/// Later unparseable rows are skipped with a warning on `warn`; a row with
/// the wrong number of values ends the session.
pub fn cmd_stream(
    checkpoint: &Checkpoint,
    input: impl BufRead,
    mut output: impl Write,
    mut warn: impl Write,
) -> Result<StreamStats> {
    let model = checkpoint.model()?;
    let calibration =
        checkpoint.calibration.clone().ok_or_else(|| Error::Checkpoint("checkpoint has no calibration".into()))?;
    let mut det = StreamDetector::new(&model, &checkpoint.params, checkpoint.schema.clone(), calibration)?;
    let d = det.n_features();
    let mut stats = StreamStats::default();
    let stdout = |e| Error::io("<stdout>", e);
    let mut first = true;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let start = Instant::now();
        let header = std::mem::take(&mut first);
        let Some(row) = parse_row(&line) else {
            if header {
                continue;
            }
            let _ = writeln!(warn, "warning: line {}: skipping malformed row", i + 1);
            stats.skipped += 1;
            continue;
        };
        if row.len() != d {
            return Err(Error::data(format!("line {}: row has {} values but the model expects {d}", i + 1, row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            let _ = writeln!(warn, "warning: line {}: skipping row with non-finite values", i + 1);
            stats.skipped += 1;
            continue;
        }
        let step = det.push(&row)?;
        if let Some(ev) = step.proactive {
            let written =
                writeln!(output, "{},{},{}", ev.timestamp, ev.score, ev.flag as u8).and_then(|_| output.flush());
            match written {
                Ok(()) => stats.emitted += 1,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break,
                Err(e) => return Err(stdout(e)),
            }
        }
        let elapsed = start.elapsed();
        stats.rows += 1;
        stats.total += elapsed;
        stats.max = stats.max.max(elapsed);
    }
    Ok(stats)
}

pub struct SynthRequest {
    pub kind: SynthKind,
    pub length: usize,
    pub train_length: Option<usize>,
    pub features: usize,
    pub rate: f64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes `train.csv`, `test.csv`, `test_labels.csv` and a `manifest.toml`
/// naming them, and returns the manifest path.
pub fn cmd_synth(req: &SynthRequest) -> Result<PathBuf> {
    let opts = SynthOptions::new(req.kind, req.features, req.rate, req.seed);
    let (train, test) = opts.pair(req.train_length.unwrap_or(req.length), req.length)?;
    std::fs::create_dir_all(&req.out).map_err(|e| Error::io(&req.out, e))?;
    let header: Vec<String> = (0..req.features).map(|j| format!("x{j}")).collect();
    write_csv(&req.out.join("train.csv"), &train, Some(&header))?;
    write_csv(&req.out.join("test.csv"), &test.series, Some(&header))?;
    let labels = test.series.labels().expect("generated test series is labeled");
    write_labels(&req.out.join("test_labels.csv"), labels)?;
    let mut manifest = Manifest::default();
    manifest.datasets.insert(
        req.kind.to_string(),
        DatasetEntry { train: "train.csv".into(), test: "test.csv".into(), labels: Some("test_labels.csv".into()) },
    );
    let path = req.out.join("manifest.toml");
    manifest.save(&path)?;
    Ok(path)
}

/// Per-term multiplication counts of one forward pass.
pub fn cmd_cost(spec: &ModelSpec, batch: usize) -> Result<CostReport> {
    spec.validate()?;
    Ok(estimate_cost(spec, batch))
}

/// Writes `index,score,flag,label`; labels default to zero.
pub fn cmd_plotdata(scores: &Path, labels: Option<&Path>, out: &Path) -> Result<usize> {
    let rows = read_scores(scores)?;
    let aligned = match labels {
        Some(p) => labels_for(&rows, &load_labels(p)?)?,
        None => vec![0; rows.len()],
    };
    let mut w = create(out)?;
    let io = |e| Error::io(out, e);
    writeln!(w, "index,score,flag,label").map_err(io)?;
    for (r, l) in rows.iter().zip(&aligned) {
        writeln!(w, "{},{},{},{l}", r.index, r.score, r.flag).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(rows.len())
}
