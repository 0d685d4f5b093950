use super::events::Event;

pub const DEFAULT_MAX_LEAD: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LeadTimeStats {
    /// `event.start - first flag` for each event that has a flag nearby;
    /// positive values are early warnings.
    pub leads: Vec<i64>,
    pub detected: usize,
    pub missed: usize,
}

impl LeadTimeStats {
    pub fn mean(&self) -> Option<f64> {
        (!self.leads.is_empty()).then(|| self.leads.iter().sum::<i64>() as f64 / self.leads.len() as f64)
    }

    pub fn median(&self) -> Option<f64> {
        if self.leads.is_empty() {
            return None;
        }
        let mut v = self.leads.clone();
        v.sort_unstable();
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 })
    }
}

/// For each event, the earliest flag time in
/// `[start - max_lead, start + len]` determines its lead.
pub fn lead_time(flag_times: &[usize], events: &[Event], max_lead: usize) -> LeadTimeStats {
    let mut sorted = flag_times.to_vec();
    sorted.sort_unstable();
    let mut leads = Vec::new();
    for e in events {
        let lo = e.start.saturating_sub(max_lead);
        let hi = e.start + e.len();
        let i = sorted.partition_point(|&t| t < lo);
        if let Some(&t) = sorted.get(i).filter(|&&t| t <= hi) {
            leads.push(e.start as i64 - t as i64);
        }
    }
    LeadTimeStats { detected: leads.len(), missed: events.len() - leads.len(), leads }
}
