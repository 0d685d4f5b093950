use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Diagonal-covariance Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    /// `[k][d]`.
    pub means: Vec<Vec<f64>>,
    /// `[k][d]`, each at least [`VARIANCE_FLOOR`].
    pub variances: Vec<Vec<f64>>,
    /// Total train log-likelihood evaluated before each M-step.
    pub log_likelihood: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmmOptions {
    pub components: usize,
    pub max_iter: usize,
    /// Stop once the per-sample log-likelihood gain falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions { components: 4, max_iter: 200, tol: 1e-8, seed: 0 }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeds `k` centers from the rows of `data`, each drawn with probability
/// proportional to its squared distance from the nearest chosen center.
fn kmeans_pp(data: &Tensor, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut centers = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

impl Gmm {
    /// EM from k-means++ seeded means. A component whose responsibility
    /// mass vanishes triggers one restart with fresh seeding; a second
    /// occurrence is an error.
    pub fn fit(data: &Tensor, opts: &GmmOptions) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        if opts.components == 0 {
            return Err(Error::config("GMM needs at least one component"));
        }
        if data.ndim() != 2 || d == 0 || n < opts.components {
            return Err(Error::data(format!(
                "GMM with {} components needs at least that many rows, got {n}",
                opts.components
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        match Self::run_em(data, opts, &mut rng) {
            Err(Error::Numeric(_)) => Self::run_em(data, opts, &mut rng),
            other => other,
        }
    }

    fn run_em(data: &Tensor, opts: &GmmOptions, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        let k = opts.components;
        let mut global_mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in global_mean.iter_mut().zip(data.row(i)) {
                *m += v / n as f64;
            }
        }
        let global_var: Vec<f64> = (0..d)
            .map(|j| {
                let v = (0..n).map(|i| (data.get(i, j) - global_mean[j]).powi(2)).sum::<f64>() / n as f64;
                v.max(VARIANCE_FLOOR)
            })
            .collect();
        let mut model = Gmm {
            weights: vec![1.0 / k as f64; k],
            means: kmeans_pp(data, k, rng),
            variances: vec![global_var; k],
            log_likelihood: Vec::new(),
        };
        let mut resp = vec![0.0; n * k];
        let mut logp = vec![0.0; k];
        for _ in 0..opts.max_iter {
            let mut ll = 0.0;
            for i in 0..n {
                model.component_log_densities(data.row(i), &mut logp);
                let lse = log_sum_exp(&logp);
                ll += lse;
                for c in 0..k {
                    resp[i * k + c] = (logp[c] - lse).exp();
                }
            }
            if !ll.is_finite() {
                return Err(Error::Numeric("GMM log-likelihood is not finite".into()));
            }
            let converged = model.log_likelihood.last().is_some_and(|&prev| (ll - prev) / (n as f64) < opts.tol);
            model.log_likelihood.push(ll);
            if converged {
                break;
            }
            for c in 0..k {
                let mass: f64 = (0..n).map(|i| resp[i * k + c]).sum();
                if mass <= 1e-12 * n as f64 {
                    return Err(Error::Numeric(format!("GMM component {c} lost all responsibility")));
                }
                let mut mean = vec![0.0; d];
                for i in 0..n {
                    let r = resp[i * k + c];
                    for (m, v) in mean.iter_mut().zip(data.row(i)) {
                        *m += r * v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= mass);
                let mut var = vec![0.0; d];
                for i in 0..n {
                    let r = resp[i * k + c];
                    for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                        *s += r * (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s = (*s / mass).max(VARIANCE_FLOOR));
                model.weights[c] = mass / n as f64;
                model.means[c] = mean;
                model.variances[c] = var;
            }
        }
        Ok(model)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = self.weights[c].ln();
            for ((v, m), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                s -= 0.5 * ((2.0 * PI * var).ln() + (v - m) * (v - m) / var);
            }
            *o = s;
        }
    }

    /// Posterior component probabilities of `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let mut lp = vec![0.0; self.n_components()];
        self.component_log_densities(x, &mut lp);
        let lse = log_sum_exp(&lp);
        lp.iter().map(|v| (v - lse).exp()).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Shape { op: "gmm_score", lhs: vec![x.len()], rhs: vec![self.n_features()] });
        }
        let mut lp = vec![0.0; self.n_components()];
        self.component_log_densities(x, &mut lp);
        Ok(log_sum_exp(&lp))
    }

    /// Negative log-likelihood of `x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.log_density(x)?)
    }

    pub fn to_arrays(&self) -> Vec<(String, Tensor)> {
        let (k, d) = (self.n_components(), self.n_features());
        vec![
            ("gmm.weights".into(), Tensor::vector(self.weights.clone())),
            ("gmm.means".into(), Tensor::from_parts(vec![k, d], self.means.concat())),
            ("gmm.variances".into(), Tensor::from_parts(vec![k, d], self.variances.concat())),
            ("gmm.log_likelihood".into(), Tensor::vector(self.log_likelihood.clone())),
        ]
    }

    pub fn from_arrays(weights: &Tensor, means: &Tensor, variances: &Tensor, trace: &Tensor) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.shape() != variances.shape() || means.ndim() != 2 || means.rows() != k || means.cols() == 0 {
            return Err(Error::Checkpoint("malformed GMM state".into()));
        }
        let rows = |t: &Tensor| (0..k).map(|c| t.row(c).to_vec()).collect::<Vec<_>>();
        Ok(Gmm {
            weights: weights.data().to_vec(),
            means: rows(means),
            variances: rows(variances),
            log_likelihood: trace.data().to_vec(),
        })
    }
}
