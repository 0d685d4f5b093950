use crate::common::rng;
use prescient::detectors::{Ecod, Gmm, GmmOptions, Svdd};
use prescient::tensor::Tensor;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn blobs(seed: u64, per_blob: usize, sigma: f64, d: usize) -> Tensor {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut data = Vec::with_capacity(2 * per_blob * d);
    for center in [-10.0, 10.0] {
        for _ in 0..per_blob {
            for _ in 0..d {
                data.push(center + noise.sample(&mut r));
            }
        }
    }
    Tensor::new(vec![2 * per_blob, d], data).unwrap()
}

pub fn em_log_likelihood_never_decreases() {
    for seed in 0..20 {
        let mut r = rng(seed + 100);
        let n = r.random_range(30..120);
        let d = r.random_range(1..4);
        let data = Tensor::new(vec![n, d], (0..n * d).map(|_| r.random_range(-3.0..3.0f64).powi(3)).collect()).unwrap();
        let opts = GmmOptions { components: r.random_range(1..5), seed, ..GmmOptions::default() };
        let gmm = Gmm::fit(&data, &opts).unwrap();
        let trace = &gmm.log_likelihood;
        assert!(trace.len() >= 2, "seed {seed}");
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "seed {seed}: {} then {}", w[0], w[1]);
        }
        assert!((gmm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..n {
            assert!((gmm.responsibilities(data.row(i)).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

pub fn separated_blob_means_are_recovered() {
    for seed in 0..20 {
        let data = blobs(seed, 200, 0.1, 2);
        let gmm = Gmm::fit(&data, &GmmOptions { components: 2, seed, ..GmmOptions::default() }).unwrap();
        let mut means = gmm.means.clone();
        means.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (m, want) in means.iter().zip([-10.0, 10.0]) {
            for &v in m {
                assert!((v - want).abs() < 0.1, "seed {seed}: mean {v}");
            }
        }
        for w in &gmm.weights {
            assert!((w - 0.5).abs() < 1e-9);
        }
    }
}

pub fn ecod_ranks_extreme_probes_above_the_median() {
    for seed in 0..20 {
        let mut r = rng(seed + 200);
        let d = r.random_range(1..6);
        let normal = Normal::new(r.random_range(-2.0..2.0), r.random_range(0.5..3.0)).unwrap();
        let n = 200;
        let data = Tensor::new(vec![n, d], (0..n * d).map(|_| normal.sample(&mut r)).collect()).unwrap();
        let ecod = Ecod::fit(&data).unwrap();
        let median: Vec<f64> = (0..d)
            .map(|j| {
                let mut col: Vec<f64> = (0..n).map(|i| data.get(i, j)).collect();
                col.sort_by(f64::total_cmp);
                col[n / 2]
            })
            .collect();
        let extreme: Vec<f64> = median.iter().map(|m| m + 10.0 * normal.std_dev()).collect();
        let train_scores: Vec<f64> = (0..n).map(|i| ecod.score(data.row(i)).unwrap()).collect();
        let mut sorted = train_scores.clone();
        sorted.sort_by(f64::total_cmp);
        let (m, e) = (ecod.score(&median).unwrap(), ecod.score(&extreme).unwrap());
        assert!(m < e, "seed {seed}");
        assert!(m < sorted[n / 2], "seed {seed}: median probe above the median train score");
        assert!(e >= sorted[n * 9 / 10], "seed {seed}: extreme probe outside the top decile");
    }
}

pub fn ecod_tails_are_rank_based() {
    for seed in 0..20 {
        let mut r = rng(seed + 300);
        let (n, d) = (50, 3);
        let raw: Vec<f64> = (0..n * d).map(|_| r.random_range(-2.0..2.0)).collect();
        let probe: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
        let warp = |x: f64| x.powi(3) + x;
        let a = Ecod::fit(&Tensor::new(vec![n, d], raw.clone()).unwrap()).unwrap();
        let b = Ecod::fit(&Tensor::new(vec![n, d], raw.iter().map(|&x| warp(x)).collect()).unwrap()).unwrap();
        let warped: Vec<f64> = probe.iter().map(|&x| warp(x)).collect();
        let (pa, pb) = (a.parts(&probe).unwrap(), b.parts(&warped).unwrap());
        assert_eq!((pa.left, pa.right), (pb.left, pb.right), "seed {seed}");
        let c = Ecod::fit(&Tensor::new(vec![n, d], raw.iter().map(|&x| 4.0 * x + 1.0).collect()).unwrap()).unwrap();
        let affine: Vec<f64> = probe.iter().map(|&x| 4.0 * x + 1.0).collect();
        assert_eq!(c.score(&affine).unwrap(), a.score(&probe).unwrap());
    }
}

/// Values on a 1/8 grid.
fn grid_data(seed: u64, n: usize, d: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n * d).map(|_| r.random_range(-64..64) as f64 / 8.0).collect()
}

pub fn svdd_is_translation_invariant() {
    for seed in 0..20 {
        let (n, d) = (64, 3);
        let raw = grid_data(seed + 400, n, d);
        let shift: Vec<f64> = {
            let mut r = rng(seed);
            (0..d).map(|_| r.random_range(-100..100) as f64).collect()
        };
        let moved: Vec<f64> = raw.iter().enumerate().map(|(i, x)| x + shift[i % d]).collect();
        for proj in [None, Some(1), Some(2)] {
            let a = Svdd::fit(&Tensor::new(vec![n, d], raw.clone()).unwrap(), proj, 7).unwrap();
            let b = Svdd::fit(&Tensor::new(vec![n, d], moved.clone()).unwrap(), proj, 7).unwrap();
            assert_eq!(a.train_mean_score, b.train_mean_score);
            assert_eq!(a.train_max_score, b.train_max_score);
            let mut r = rng(seed + 500);
            for _ in 0..10 {
                let probe: Vec<f64> = (0..d).map(|_| r.random_range(-200..200) as f64 / 8.0).collect();
                let shifted: Vec<f64> = probe.iter().zip(&shift).map(|(p, s)| p + s).collect();
                assert_eq!(a.score(&probe).unwrap(), b.score(&shifted).unwrap(), "seed {seed} {proj:?}");
            }
        }
    }
}
