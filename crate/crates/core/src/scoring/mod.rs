//! Anomaly scores from forecast and reconstruction errors, Top-K and
//! threshold flagging, post-hoc detector scoring and streaming inference.

mod batch;
mod stream;

pub use batch::{
    backward_score, error_scores, flatten_predictions, forward_score, posthoc_detector_scores, predict_windows,
    reactive_score,
};
pub use stream::{calibrate, Calibration, StreamDetector, StreamEvent, StreamStep};

use crate::error::{Error, Result};

/// Which timestamp a window's score is attributed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alignment {
    /// The first forecast row (the window anchor).
    ForecastTarget,
    /// The last row of the reconstructed past (anchor - 1).
    WindowEnd,
}

/// Scores for consecutive timestamps `first..first + scores.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    pub alignment: Alignment,
    pub first: usize,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn timestamps(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.scores.len()
    }

    /// The labels of the scored timestamps.
    pub fn aligned<'a, T>(&self, per_timestamp: &'a [T]) -> Result<&'a [T]> {
        let r = self.timestamps();
        per_timestamp.get(r.clone()).ok_or_else(|| {
            Error::data(format!(
                "scores cover timestamps {}..{} but only {} labels are available",
                r.start,
                r.end,
                per_timestamp.len()
            ))
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScoreSeries {
        ScoreSeries { scores: self.scores.iter().map(|&s| f(s)).collect(), ..*self }
    }
}

/// `log(1 + s)` element-wise.
pub fn log_stabilize(series: &ScoreSeries) -> Result<ScoreSeries> {
    if let Some(bad) = series.scores.iter().find(|&&s| !(s >= 0.0)) {
        return Err(Error::Numeric(format!("cannot log-stabilize negative score {bad}")));
    }
    Ok(series.map(f64::ln_1p))
}

/// Flags the `min(k, n)` largest scores; among equal scores the earlier
/// position wins.
pub fn topk_flags(scores: &[f64], k: usize) -> Vec<u8> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut flags = vec![0u8; scores.len()];
    for &i in order.iter().take(k) {
        flags[i] = 1;
    }
    flags
}

/// Flags every score strictly above `tau`.
pub fn threshold_flags(scores: &[f64], tau: f64) -> Vec<u8> {
    scores.iter().map(|&s| (s > tau) as u8).collect()
}

/// Linear-interpolation quantile of `values`, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::data("quantile of an empty set"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(format!("quantile {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}
