use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSchema, LoadOptions, Manifest};
use crate::detectors::DetectorConfig;
use crate::error::{Error, Result};
use crate::layers::PositionalEncoding;
use crate::models::{Direction, ModelSpec};
use crate::training::TrainConfig;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "PRESCIENT_OUT";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest to resolve `dataset` against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub skip_columns: usize,
    pub max_distinct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub direction: Direction,
    pub window: usize,
    pub horizon: usize,
    pub channels: usize,
    pub tcn_layers: usize,
    pub kernel_size: usize,
    pub hidden: usize,
    pub heads: usize,
    /// Defaults to `4 * hidden`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedforward: Option<usize>,
    pub encoder_layers: usize,
    pub positional_encoding: PositionalEncoding,
    pub dropout: f64,
    pub alpha: f64,
    pub beta: f64,
    pub huber_delta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            direction: Direction::Forward,
            window: 5,
            horizon: 1,
            channels: 32,
            tcn_layers: 2,
            kernel_size: 3,
            hidden: 32,
            heads: 2,
            feedforward: None,
            encoder_layers: 1,
            positional_encoding: PositionalEncoding::Sinusoidal,
            dropout: 0.1,
            alpha: 1.0,
            beta: 1.0,
            huber_delta: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self, continuous: Vec<usize>, discrete: Vec<usize>) -> Result<ModelSpec> {
        let mut spec = ModelSpec::with_sizes(
            self.direction,
            self.window,
            self.horizon,
            continuous,
            discrete,
            self.channels,
            self.tcn_layers,
            self.hidden,
        );
        spec.tcn.kernel_size = self.kernel_size;
        spec.transformer.heads = self.heads;
        spec.transformer.feedforward_dim = self.feedforward.unwrap_or(4 * self.hidden);
        spec.transformer.layers = self.encoder_layers;
        spec.transformer.positional_encoding = self.positional_encoding;
        spec.dropout = self.dropout;
        spec.alpha = self.alpha;
        spec.beta = self.beta;
        spec.huber_delta = self.huber_delta;
        spec.validate()?;
        Ok(spec)
    }

    pub fn spec_for(&self, schema: &FeatureSchema) -> Result<ModelSpec> {
        self.spec(schema.continuous.clone(), schema.discrete.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Log-stabilized error scores, Top-K flags.
    Topk,
    /// Error scores, flagged above a threshold.
    Threshold,
    /// Post-hoc detector scores on the model outputs.
    Detector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub strategy: Strategy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Calibration quantile of train-split scores.
    pub quantile: f64,
    pub detector: DetectorConfig,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            strategy: Strategy::Topk,
            k: None,
            threshold: None,
            quantile: 0.99,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Everything one run needs, read from a TOML file with `[data]`,
/// `[model]`, `[train]`, `[score]` and `[run]` sections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub score: ScoreConfig,
    pub run: RunSection,
}

/// Resolved input files of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let d = &mut cfg.data;
        for p in [&mut d.manifest, &mut d.train, &mut d.test, &mut d.labels].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Sets one seed for initialization, shuffling, dropout and detectors.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.score.detector.seed = seed;
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions { skip_columns: self.data.skip_columns, expected_features: None }
    }

    pub fn max_distinct(&self) -> usize {
        if self.data.max_distinct == 0 {
            2
        } else {
            self.data.max_distinct
        }
    }

    /// Explicit `train`/`test`/`labels` entries win over the manifest entry.
    pub fn data_paths(&self) -> Result<DataPaths> {
        let mut paths = DataPaths { train: None, test: None, labels: None };
        if let Some(m) = &self.data.manifest {
            let manifest = Manifest::load(m)?;
            let name = self
                .data
                .dataset
                .as_deref()
                .or_else(|| (manifest.datasets.len() == 1).then(|| manifest.datasets.keys().next().unwrap().as_str()))
                .ok_or_else(|| Error::config("data.dataset must name a manifest entry"))?;
            let e = manifest.get(name)?;
            paths.train = Some(e.train.clone());
            paths.test = Some(e.test.clone());
            paths.labels = e.labels.clone();
        }
        if let Some(p) = &self.data.train {
            paths.train = Some(p.clone());
        }
        if let Some(p) = &self.data.test {
            paths.test = Some(p.clone());
        }
        if let Some(p) = &self.data.labels {
            paths.labels = Some(p.clone());
        }
        Ok(paths)
    }

    /// `run.out`, else `$PRESCIENT_OUT/<name>`, else `runs/<name>`, where the
    /// name defaults to `<dataset>-<direction>-s<seed>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(o) = &self.run.out {
            return o.clone();
        }
        let name = self.run.name.clone().unwrap_or_else(|| {
            format!("{}-{}-s{}", self.data.dataset.as_deref().unwrap_or("run"), self.model.direction, self.train.seed)
        });
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(name)
    }
}
