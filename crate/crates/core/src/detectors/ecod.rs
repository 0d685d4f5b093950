use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Empirical-CDF outlier model: sorted train values and skewness per feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecod {
    sorted: Vec<Vec<f64>>,
    skewness: Vec<f64>,
}

/// Left tail, right tail and skewness-selected outlier scores of one probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EcodParts {
    pub left: f64,
    pub right: f64,
    pub auto: f64,
}

impl EcodParts {
    pub fn score(&self) -> f64 {
        self.left.max(self.right).max(self.auto)
    }
}

fn skewness(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if m2 > 0.0 {
        m3 / m2.powf(1.5)
    } else {
        0.0
    }
}

impl Ecod {
    pub fn fit(data: &Tensor) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        if n == 0 || d == 0 || data.ndim() != 2 {
            return Err(Error::data("ECOD needs a non-empty [n, d] train matrix"));
        }
        let mut sorted = Vec::with_capacity(d);
        let mut skew = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = (0..n).map(|i| data.get(i, j)).collect();
            skew.push(skewness(&col));
            col.sort_by(f64::total_cmp);
            sorted.push(col);
        }
        Ok(Ecod { sorted, skewness: skew })
    }

    pub fn n_features(&self) -> usize {
        self.sorted.len()
    }

    pub fn n_train(&self) -> usize {
        self.sorted[0].len()
    }

    /// `(P[X <= x], P[X >= x])` under the train ECDF of feature `j`, each
    /// clipped to `[1/(n+1), 1]`.
    pub fn tails(&self, j: usize, x: f64) -> (f64, f64) {
        let col = &self.sorted[j];
        let n = col.len() as f64;
        let at_most = col.partition_point(|&v| v <= x) as f64;
        let below = col.partition_point(|&v| v < x) as f64;
        let lo = 1.0 / (n + 1.0);
        ((at_most / n).clamp(lo, 1.0), ((n - below) / n).clamp(lo, 1.0))
    }

    pub fn parts(&self, x: &[f64]) -> Result<EcodParts> {
        if x.len() != self.n_features() {
            return Err(Error::Shape { op: "ecod_score", lhs: vec![x.len()], rhs: vec![self.n_features()] });
        }
        let mut p = EcodParts { left: 0.0, right: 0.0, auto: 0.0 };
        for (j, &v) in x.iter().enumerate() {
            let (l, r) = self.tails(j, v);
            let (l, r) = (-l.ln(), -r.ln());
            p.left += l;
            p.right += r;
            p.auto += if self.skewness[j] < 0.0 { l } else { r };
        }
        Ok(p)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.parts(x)?.score())
    }

    /// `[d, n]` sorted values followed by the `[d]` skewness vector.
    pub fn to_arrays(&self) -> Vec<(String, Tensor)> {
        let (d, n) = (self.n_features(), self.n_train());
        vec![
            ("ecod.sorted".into(), Tensor::from_parts(vec![d, n], self.sorted.concat())),
            ("ecod.skewness".into(), Tensor::vector(self.skewness.clone())),
        ]
    }

    pub fn from_arrays(sorted: &Tensor, skewness: &Tensor) -> Result<Self> {
        if sorted.ndim() != 2 || skewness.len() != sorted.rows() || sorted.cols() == 0 {
            return Err(Error::Checkpoint("malformed ECOD state".into()));
        }
        let rows: Vec<Vec<f64>> = (0..sorted.rows()).map(|j| sorted.row(j).to_vec()).collect();
        if rows.iter().any(|r| r.windows(2).any(|w| w[0] > w[1])) {
            return Err(Error::Checkpoint("ECOD values are not sorted".into()));
        }
        Ok(Ecod { sorted: rows, skewness: skewness.data().to_vec() })
    }
}
