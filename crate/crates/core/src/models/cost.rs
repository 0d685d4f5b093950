use std::fmt;

use super::spec::ModelSpec;

/// One additive term of the per-forward-pass cost, in scalar multiplications.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostTerm {
    pub name: &'static str,
    /// Asymptotic form of the term.
    pub order: &'static str,
    pub multiplications: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub batch: usize,
    pub terms: Vec<CostTerm>,
}

impl CostReport {
    pub fn total(&self) -> u64 {
        self.terms.iter().map(|t| t.multiplications).sum()
    }

    pub fn term(&self, name: &str) -> Option<&CostTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// The most expensive term; the first listed wins a tie.
    pub fn dominant(&self) -> &CostTerm {
        let mut best = &self.terms[0];
        for t in &self.terms[1..] {
            if t.multiplications > best.multiplications {
                best = t;
            }
        }
        best
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "batch = {}", self.batch)?;
        for t in &self.terms {
            writeln!(f, "{} = {}  # O({})", t.name, t.multiplications, t.order)?;
        }
        writeln!(f, "total = {}", self.total())?;
        write!(f, "dominant = {}", self.dominant().name)
    }
}

/// Multiplication counts of an inference forward pass over `batch` windows,
/// matching what the layer implementations actually execute.
pub fn estimate_cost(spec: &ModelSpec, batch: usize) -> CostReport {
    let r = spec.input_rows() as u64;
    let b = batch as u64;

    let mut tcn = 0u64;
    let mut c_in = spec.tcn.in_features as u64;
    let c = spec.tcn.channels as u64;
    let k = spec.tcn.kernel_size;
    for l in 0..spec.tcn.layers {
        let d = spec.tcn.dilation(l);
        let taps: u64 = (0..k).map(|j| r.saturating_sub(((k - 1 - j) * d) as u64)).sum();
        tcn += taps * c_in * c;
        if c_in != c {
            tcn += r * c_in * c;
        }
        c_in = c;
    }

    let h = spec.gru.hidden_size as u64;
    let gru = r * (c * 3 * h + h * 3 * h + 4 * h);

    let dm = spec.transformer.model_dim as u64;
    let heads = spec.transformer.heads as u64;
    let ff = spec.transformer.feedforward_dim as u64;
    let layers = spec.transformer.layers as u64;
    let attention = layers * (2 * r * r * dm + heads * r * r);
    let projections = layers * r * (3 * dm * dm + dm * dm + 2 * dm * ff);

    let out = (spec.output_rows() * spec.n_features()) as u64;
    let head = h * out;

    let term = |name, order, per_window: u64| CostTerm { name, order, multiplications: b * per_window };
    CostReport {
        batch,
        terms: vec![
            term("tcn", "L_TCN*B*C*D*W", tcn),
            term("gru", "B*W*C*H_GRU", gru),
            term("attention", "B*W^2*H_GRU", attention),
            term("heads", "B*H_GRU*D", head),
            term("projections", "B*W*H_GRU^2", projections),
        ],
    }
}
