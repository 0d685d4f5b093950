//! Unsupervised detectors fitted on train-split model outputs. All scores
//! are oriented so that higher means more anomalous.

mod ecod;
mod gmm;
mod svdd;

pub use ecod::{Ecod, EcodParts};
pub use gmm::{Gmm, GmmOptions, VARIANCE_FLOOR};
pub use svdd::Svdd;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Gmm,
    Ecod,
    Svdd,
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorKind::Gmm => "gmm",
            DetectorKind::Ecod => "ecod",
            DetectorKind::Svdd => "svdd",
        })
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(DetectorKind::Gmm),
            "ecod" => Ok(DetectorKind::Ecod),
            "svdd" | "deepsvdd" => Ok(DetectorKind::Svdd),
            other => Err(Error::config(format!("unknown detector {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub gmm_components: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    /// Learned SVDD projection dimension; identity when absent.
    pub svdd_projection: Option<usize>,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let g = GmmOptions::default();
        DetectorConfig {
            kind: DetectorKind::Ecod,
            gmm_components: g.components,
            gmm_max_iter: g.max_iter,
            gmm_tol: g.tol,
            svdd_projection: None,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn with_kind(kind: DetectorKind) -> Self {
        DetectorConfig { kind, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedDetector {
    Gmm(Gmm),
    Ecod(Ecod),
    Svdd(Svdd),
}

impl FittedDetector {
    /// Fits on the rows of a `[n, d]` matrix.
    pub fn fit(cfg: &DetectorConfig, data: &Tensor) -> Result<Self> {
        if data.ndim() != 2 || data.rows() == 0 {
            return Err(Error::data("detector fit needs at least one train vector"));
        }
        Ok(match cfg.kind {
            DetectorKind::Gmm => FittedDetector::Gmm(Gmm::fit(
                data,
                &GmmOptions {
                    components: cfg.gmm_components,
                    max_iter: cfg.gmm_max_iter,
                    tol: cfg.gmm_tol,
                    seed: cfg.seed,
                },
            )?),
            DetectorKind::Ecod => FittedDetector::Ecod(Ecod::fit(data)?),
            DetectorKind::Svdd => FittedDetector::Svdd(Svdd::fit(data, cfg.svdd_projection, cfg.seed)?),
        })
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            FittedDetector::Gmm(_) => DetectorKind::Gmm,
            FittedDetector::Ecod(_) => DetectorKind::Ecod,
            FittedDetector::Svdd(_) => DetectorKind::Svdd,
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedDetector::Gmm(g) => g.score(x),
            FittedDetector::Ecod(e) => e.score(x),
            FittedDetector::Svdd(s) => s.score(x),
        }
    }

    /// One score per row of `data`.
    pub fn score_rows(&self, data: &Tensor) -> Result<Vec<f64>> {
        (0..data.rows()).map(|i| self.score(data.row(i))).collect()
    }

    pub fn to_arrays(&self) -> Vec<(String, Tensor)> {
        match self {
            FittedDetector::Gmm(g) => g.to_arrays(),
            FittedDetector::Ecod(e) => e.to_arrays(),
            FittedDetector::Svdd(s) => s.to_arrays(),
        }
    }

    pub fn from_arrays(kind: DetectorKind, arrays: &IndexMap<String, Tensor>) -> Result<Self> {
        let get =
            |name: &str| arrays.get(name).ok_or_else(|| Error::Checkpoint(format!("missing detector array {name}")));
        Ok(match kind {
            DetectorKind::Gmm => FittedDetector::Gmm(Gmm::from_arrays(
                get("gmm.weights")?,
                get("gmm.means")?,
                get("gmm.variances")?,
                get("gmm.log_likelihood")?,
            )?),
            DetectorKind::Ecod => FittedDetector::Ecod(Ecod::from_arrays(get("ecod.sorted")?, get("ecod.skewness")?)?),
            DetectorKind::Svdd => FittedDetector::Svdd(Svdd::from_arrays(
                get("svdd.mean")?,
                get("svdd.train_scores")?,
                arrays.get("svdd.projection"),
            )?),
        })
    }
}
