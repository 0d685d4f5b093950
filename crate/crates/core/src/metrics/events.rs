use std::ops::Range;

/// Inclusive interval `[start, end]` of consecutive positive timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub start: usize,
    pub end: usize,
}

impl Event {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Event { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end + 1
    }
}

/// Maximal runs of non-zero entries, in order.
pub fn events_from_labels(labels: &[u8]) -> Vec<Event> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (t, &l) in labels.iter().enumerate() {
        match (l != 0, open) {
            (true, None) => open = Some(t),
            (false, Some(s)) => {
                out.push(Event::new(s, t - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push(Event::new(s, labels.len() - 1));
    }
    out
}
