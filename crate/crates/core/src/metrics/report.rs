use std::fmt;

use crate::error::Result;

use super::{
    events_from_labels, f1_at_k, f1_composite, f1_point, f1_range, lead_time, CompositeScore, LeadTimeStats,
    PointScore, RangeScore, DEFAULT_MAX_LEAD,
};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub point: PointScore,
    pub f1_at_k: f64,
    pub composite: CompositeScore,
    pub range: RangeScore,
    pub lead: LeadTimeStats,
}

/// All metrics for one aligned `(scores, flags, labels)` triple. Lead
/// times are measured from the flag positions.
pub fn evaluate(scores: &[f64], flags: &[u8], labels: &[u8]) -> Result<MetricReport> {
    let point = f1_point(flags, labels)?;
    let times: Vec<usize> = flags.iter().enumerate().filter(|(_, &f)| f != 0).map(|(t, _)| t).collect();
    Ok(MetricReport {
        point,
        f1_at_k: f1_at_k(scores, labels)?,
        composite: f1_composite(flags, labels)?,
        range: f1_range(flags, labels)?,
        lead: lead_time(&times, &events_from_labels(labels), DEFAULT_MAX_LEAD),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.4}"))
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.point;
        writeln!(f, "f1 = {:.4}", p.f1)?;
        writeln!(f, "precision = {:.4}", p.precision)?;
        writeln!(f, "recall = {:.4}", p.recall)?;
        writeln!(f, "tp = {}", p.tp)?;
        writeln!(f, "fp = {}", p.fp)?;
        writeln!(f, "fn = {}", p.fn_)?;
        writeln!(f, "f1_at_k = {:.4}", self.f1_at_k)?;
        writeln!(f, "f1_c = {:.4}", self.composite.f1)?;
        writeln!(f, "f1_c_precision = {:.4}", self.composite.precision)?;
        writeln!(f, "f1_c_recall = {:.4}", self.composite.recall)?;
        writeln!(f, "events = {}", self.composite.events)?;
        writeln!(f, "events_detected = {}", self.composite.detected)?;
        writeln!(f, "f1_r = {:.4}", self.range.f1)?;
        writeln!(f, "f1_r_precision = {:.4}", self.range.precision)?;
        writeln!(f, "f1_r_recall = {:.4}", self.range.recall)?;
        writeln!(f, "lead_mean = {}", opt(self.lead.mean()))?;
        writeln!(f, "lead_median = {}", opt(self.lead.median()))?;
        writeln!(f, "lead_detected = {}", self.lead.detected)?;
        write!(f, "lead_missed = {}", self.lead.missed)
    }
}
