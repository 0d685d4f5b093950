//! Point-wise, Top-K, composite and range-based F1, plus lead-time statistics.
//!
//! Flags and labels are 0/1 byte vectors over the same scored timestamps.

mod events;
mod lead;
mod report;

pub use events::{events_from_labels, Event};
pub use lead::{lead_time, LeadTimeStats, DEFAULT_MAX_LEAD};
pub use report::{evaluate, MetricReport};

use crate::error::{Error, Result};
use crate::scoring::topk_flags;

/// Harmonic mean, zero when both inputs are zero.
pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check(flags: &[u8], labels: &[u8]) -> Result<()> {
    if flags.len() != labels.len() {
        return Err(Error::data(format!("flags have length {} but labels have length {}", flags.len(), labels.len())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointScore {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_point(flags: &[u8], labels: &[u8]) -> Result<PointScore> {
    check(flags, labels)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&f, &l) in flags.iter().zip(labels) {
        match (f != 0, l != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(PointScore { tp, fp, fn_, precision, recall, f1: harmonic(precision, recall) })
}

/// Point-wise F1 of the Top-K flags, with `K` the number of labeled points.
pub fn f1_at_k(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::data(format!(
            "scores have length {} but labels have length {}",
            scores.len(),
            labels.len()
        )));
    }
    let k = labels.iter().filter(|&&l| l != 0).count();
    Ok(f1_point(&topk_flags(scores, k), labels)?.f1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeScore {
    pub events: usize,
    pub detected: usize,
    /// Event-wise recall.
    pub recall: f64,
    /// Point-wise precision.
    pub precision: f64,
    pub f1: f64,
}

/// Event-wise recall (an event counts once any of its points is flagged)
/// combined with point-wise precision.
pub fn f1_composite(flags: &[u8], labels: &[u8]) -> Result<CompositeScore> {
    let point = f1_point(flags, labels)?;
    let events = events_from_labels(labels);
    let detected = events.iter().filter(|e| e.range().any(|t| flags[t] != 0)).count();
    let recall = ratio(detected, events.len());
    Ok(CompositeScore {
        events: events.len(),
        detected,
        recall,
        precision: point.precision,
        f1: harmonic(point.precision, recall),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Weight of the existence reward in each range credit; the rest rewards
/// the overlap fraction.
pub const RANGE_EXISTENCE_WEIGHT: f64 = 0.5;

fn range_credit(range: &Event, other: &[u8]) -> f64 {
    let hit = range.range().filter(|&t| other[t] != 0).count();
    let existence = if hit > 0 { 1.0 } else { 0.0 };
    RANGE_EXISTENCE_WEIGHT * existence + (1.0 - RANGE_EXISTENCE_WEIGHT) * hit as f64 / range.len() as f64
}

/// Range-based F1 with flat positional bias. Each labeled event earns
/// `0.5 * [overlapped] + 0.5 * (flagged fraction of the event)`; each
/// flagged run earns the symmetric credit against the labels. Recall and
/// precision are the mean credits (zero when there are no ranges).
pub fn f1_range(flags: &[u8], labels: &[u8]) -> Result<RangeScore> {
    check(flags, labels)?;
    let truth = events_from_labels(labels);
    let predicted = events_from_labels(flags);
    let mean = |xs: &[Event], other: &[u8]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().map(|e| range_credit(e, other)).sum::<f64>() / xs.len() as f64
        }
    };
    let recall = mean(&truth, flags);
    let precision = mean(&predicted, labels);
    Ok(RangeScore { precision, recall, f1: harmonic(precision, recall) })
}
