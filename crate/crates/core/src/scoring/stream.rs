use std::collections::VecDeque;

use crate::data::{FeatureSchema, WindowSet};
use crate::detectors::{DetectorConfig, FittedDetector};
use crate::error::{Error, Result};
use crate::models::{Direction, Model, Predictor};
use crate::params::ModelParams;
use crate::tensor::Tensor;

use super::batch::{error_scores, flatten_predictions, posthoc_detector_scores, predict_windows};
use super::quantile;

/// Train-split statistics that turn raw scores into flags without labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Fitted on flattened train predictions.
    pub detector: FittedDetector,
    /// Quantile of the detector's train scores.
    pub proactive_threshold: f64,
    /// Quantile of the train prediction errors.
    pub reactive_threshold: f64,
    pub quantile: f64,
}

pub fn calibrate(
    model: &Model,
    params: &ModelParams,
    train_windows: &WindowSet<'_>,
    detector: &DetectorConfig,
    q: f64,
) -> Result<Calibration> {
    let preds = predict_windows(model, params, train_windows)?;
    let flat = flatten_predictions(&preds)?;
    let (det, det_scores) = posthoc_detector_scores(&flat, &flat, detector)?;
    let errors = error_scores(&preds, train_windows)?;
    Ok(Calibration {
        detector: det,
        proactive_threshold: quantile(&det_scores, q)?,
        reactive_threshold: quantile(&errors, q)?,
        quantile: q,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamEvent {
    pub timestamp: usize,
    pub score: f64,
    pub flag: bool,
}

/// What one incoming row produces.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StreamStep {
    /// Judgement of the row just received against the forecast made for it.
    pub reactive: Option<StreamEvent>,
    /// Judgement of the next row, from its forecast alone.
    pub proactive: Option<StreamEvent>,
}

/// Online forward-model inference over a ring buffer of the last `W`
/// normalized rows. After row `t` arrives it emits the proactive event for
/// `t + 1`, computed from rows `<= t` only.
pub struct StreamDetector<'m> {
    predictor: Predictor<'m>,
    schema: FeatureSchema,
    calibration: Calibration,
    ring: VecDeque<Vec<f64>>,
    pending: Option<Vec<f64>>,
    next: usize,
}

impl<'m> StreamDetector<'m> {
    pub fn new(
        model: &'m Model,
        params: &ModelParams,
        schema: FeatureSchema,
        calibration: Calibration,
    ) -> Result<Self> {
        let spec = model.spec();
        if spec.direction != Direction::Forward {
            return Err(Error::config("streaming needs a forward model"));
        }
        if schema.n_features != spec.n_features() {
            return Err(Error::config(format!(
                "schema has {} features, model expects {}",
                schema.n_features,
                spec.n_features()
            )));
        }
        Ok(StreamDetector {
            predictor: model.predictor(params)?,
            schema,
            calibration,
            ring: VecDeque::with_capacity(spec.window + 1),
            pending: None,
            next: 0,
        })
    }

    /// Number of rows consumed so far.
    pub fn position(&self) -> usize {
        self.next
    }

    pub fn buffered(&self) -> usize {
        self.ring.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features
    }

    fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        let mut row = raw.to_vec();
        for (j, &c) in self.schema.continuous.iter().enumerate() {
            row[c] = (row[c] - self.schema.mean[j]) / self.schema.std[j];
        }
        row
    }

    /// Consumes the row for the next timestamp, in original units.
    pub fn push(&mut self, raw: &[f64]) -> Result<StreamStep> {
        let d = self.schema.n_features;
        if raw.len() != d {
            return Err(Error::data(format!("row has {} values, expected {d}", raw.len())));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("row contains a non-finite value"));
        }
        let t = self.next;
        let row = self.normalize(raw);
        let mut step = StreamStep::default();
        if let Some(forecast) = self.pending.take() {
            let score = forecast.iter().zip(&row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d as f64;
            step.reactive =
                Some(StreamEvent { timestamp: t, score, flag: score > self.calibration.reactive_threshold });
        }
        let w = self.predictor.model().spec().window;
        self.ring.push_back(row);
        if self.ring.len() > w {
            self.ring.pop_front();
        }
        if self.ring.len() == w {
            let data: Vec<f64> = self.ring.iter().flatten().copied().collect();
            let input = Tensor::new(vec![w, d], data)?;
            let pred = self.predictor.predict(&input)?.assemble(self.predictor.model().spec(), true);
            let score = self.calibration.detector.score(pred.data())?;
            step.proactive =
                Some(StreamEvent { timestamp: t + 1, score, flag: score > self.calibration.proactive_threshold });
            self.pending = Some(pred.row(0).to_vec());
        }
        self.next += 1;
        Ok(step)
    }
}
