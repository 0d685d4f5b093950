use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Centered-hypersphere scorer: `score(x) = ||P (x - mean)||^2`, where `P`
/// is the identity or a learned `[k, d]` projection with orthonormal rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Svdd {
    mean: Vec<f64>,
    /// Row-major `[k, d]`.
    projection: Option<Tensor>,
    /// Mean and maximum train score.
    pub train_mean_score: f64,
    pub train_max_score: f64,
}

const SUBSPACE_ITERS: usize = 300;

impl Svdd {
    /// Identity projection when `projection_dim` is `None`. Otherwise the
    /// projection spans the `k` directions of least train variance, which
    /// minimizes the mean squared distance to the center among projections
    /// with orthonormal rows.
    pub fn fit(data: &Tensor, projection_dim: Option<usize>, seed: u64) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        if n == 0 || d == 0 || data.ndim() != 2 {
            return Err(Error::data("SVDD needs a non-empty [n, d] train matrix"));
        }
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let projection = match projection_dim {
            None => None,
            Some(k) if k == 0 || k > d => {
                return Err(Error::config(format!("SVDD projection dimension {k} must be in 1..={d}")))
            }
            Some(k) => Some(minor_subspace(data, &mean, k, seed)),
        };
        let mut model = Svdd { mean, projection, train_mean_score: 0.0, train_max_score: 0.0 };
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for i in 0..n {
            let s = model.score(data.row(i))?;
            sum += s;
            max = max.max(s);
        }
        model.train_mean_score = sum / n as f64;
        model.train_max_score = max;
        Ok(model)
    }

    pub fn center(&self) -> Vec<f64> {
        match &self.projection {
            None => self.mean.clone(),
            Some(p) => project(p, &self.mean),
        }
    }

    pub fn projection(&self) -> Option<&Tensor> {
        self.projection.as_ref()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.mean.len() {
            return Err(Error::Shape { op: "svdd_score", lhs: vec![x.len()], rhs: vec![self.mean.len()] });
        }
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = match &self.projection {
            None => diff,
            Some(p) => project(p, &diff),
        };
        Ok(z.iter().map(|v| v * v).sum())
    }

    pub fn to_arrays(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            ("svdd.mean".into(), Tensor::vector(self.mean.clone())),
            ("svdd.train_scores".into(), Tensor::vector(vec![self.train_mean_score, self.train_max_score])),
        ];
        if let Some(p) = &self.projection {
            out.push(("svdd.projection".into(), p.clone()));
        }
        out
    }

    pub fn from_arrays(mean: &Tensor, scores: &Tensor, projection: Option<&Tensor>) -> Result<Self> {
        if scores.len() != 2 || mean.is_empty() {
            return Err(Error::Checkpoint("malformed SVDD state".into()));
        }
        if let Some(p) = projection {
            if p.ndim() != 2 || p.cols() != mean.len() {
                return Err(Error::Checkpoint("SVDD projection does not match its center".into()));
            }
        }
        Ok(Svdd {
            mean: mean.data().to_vec(),
            projection: projection.cloned(),
            train_mean_score: scores.data()[0],
            train_max_score: scores.data()[1],
        })
    }
}

fn project(p: &Tensor, v: &[f64]) -> Vec<f64> {
    (0..p.rows()).map(|r| p.row(r).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Orthonormal basis (as rows) of the `k` least-variance directions, by
/// subspace iteration on `(trace + 1) I - cov`.
fn minor_subspace(data: &Tensor, mean: &[f64], k: usize, seed: u64) -> Tensor {
    let (n, d) = (data.rows(), data.cols());
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let r = data.row(i);
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in 0..d {
                cov[a * d + b] += da * (r[b] - mean[b]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);
    let shift = (0..d).map(|a| cov[a * d + a]).sum::<f64>() + 1.0;
    let mut m = cov.iter().map(|c| -c).collect::<Vec<_>>();
    for a in 0..d {
        m[a * d + a] += shift;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    orthonormalize(&mut basis);
    for _ in 0..SUBSPACE_ITERS {
        for v in basis.iter_mut() {
            *v = (0..d).map(|a| (0..d).map(|b| m[a * d + b] * v[b]).sum()).collect();
        }
        orthonormalize(&mut basis);
    }
    Tensor::from_parts(vec![k, d], basis.concat())
}

fn orthonormalize(basis: &mut [Vec<f64>]) {
    for i in 0..basis.len() {
        for j in 0..i {
            let dot: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = basis.split_at_mut(i);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= dot * y;
            }
        }
        let norm = basis[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            basis[i].iter_mut().for_each(|x| *x /= norm);
        }
    }
}
