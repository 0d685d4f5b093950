use crate::common::{brute_topk, random_input, random_spec, rng};
use prescient::data::{make_windows, TimeSeries};
use prescient::detectors::{DetectorConfig, DetectorKind, FittedDetector};
use prescient::models::{brm_forward, ffm_forward, Direction, Model};
use prescient::scoring::{
    backward_score, flatten_predictions, forward_score, log_stabilize, posthoc_detector_scores, predict_windows,
    quantile, reactive_score, threshold_flags, topk_flags, Alignment, ScoreSeries,
};
use prescient::tensor::{logistic, Tensor};
use rand::Rng;

const CASES: u64 = 100;

fn random_series(r: &mut rand_chacha::ChaCha8Rng, spec: &prescient::models::ModelSpec) -> TimeSeries {
    let len = spec.window + spec.horizon + r.random_range(0..8);
    TimeSeries::new(random_input(r, spec, len), None).unwrap()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn rows(series: &TimeSeries, range: std::ops::Range<usize>) -> Vec<f64> {
    range.flat_map(|t| series.row(t).to_vec()).collect()
}

pub fn forward_scores_match_brute_force() {
    for seed in 0..CASES {
        let mut r = rng(seed);
        let spec = random_spec(&mut r, Direction::Forward);
        let model = Model::new(spec.clone()).unwrap();
        let params = model.init_params(seed);
        let series = random_series(&mut r, &spec);
        let windows = make_windows(&series, spec.window, spec.horizon, Direction::Forward).unwrap();
        let got = forward_score(&model, &params, &windows).unwrap();
        let (w, h) = (spec.window, spec.horizon);
        let mut want = Vec::new();
        for t in w..=series.len() - h {
            let past = Tensor::new(vec![w, spec.n_features()], rows(&series, t - w..t)).unwrap();
            let pred = ffm_forward(&model, &params, &past).unwrap().assemble(&spec, true);
            want.push(mse(pred.data(), &rows(&series, t..t + h)));
        }
        assert_eq!(got.scores, want, "seed {seed}");
        assert_eq!((got.first, got.alignment), (w, Alignment::ForecastTarget));
    }
}

pub fn backward_scores_match_brute_force() {
    for seed in 0..CASES {
        let mut r = rng(seed + 1000);
        let spec = random_spec(&mut r, Direction::Backward);
        let model = Model::new(spec.clone()).unwrap();
        let params = model.init_params(seed);
        let series = random_series(&mut r, &spec);
        let windows = make_windows(&series, spec.window, spec.horizon, Direction::Backward).unwrap();
        let got = backward_score(&model, &params, &windows).unwrap();
        let (w, h, d) = (spec.window, spec.horizon, spec.n_features());
        let mut want = Vec::new();
        for t in w..=series.len() - h {
            let future = Tensor::new(vec![h, d], rows(&series, t..t + h)).unwrap();
            let mut pred = brm_forward(&model, &params, &future).unwrap();
            for row in 0..w {
                for &c in &spec.discrete {
                    let v = &mut pred.data_mut()[row * d + c];
                    *v = logistic(*v);
                }
            }
            want.push(mse(pred.data(), &rows(&series, t - w..t)));
        }
        assert_eq!(got.scores, want, "seed {seed}");
        assert_eq!((got.first, got.alignment), (w - 1, Alignment::WindowEnd));
        assert_eq!(got.timestamps(), w - 1..series.len() - h);
    }
}

pub fn reactive_scores_compare_the_first_forecast_row() {
    for seed in 0..CASES / 4 {
        let mut r = rng(seed + 2000);
        let spec = random_spec(&mut r, Direction::Forward);
        let model = Model::new(spec.clone()).unwrap();
        let params = model.init_params(seed);
        let series = random_series(&mut r, &spec);
        let got = reactive_score(&model, &params, &series).unwrap();
        let w = spec.window;
        let one_step = prescient::models::ModelSpec { horizon: 1, ..spec.clone() };
        let one_model = Model::new(one_step).unwrap();
        let compatible = one_model.layout().validate(&params).is_ok();
        assert_eq!(got.first, w);
        assert_eq!(got.len(), series.len() - w);
        for (i, t) in (w..series.len()).enumerate() {
            let past = Tensor::new(vec![w, spec.n_features()], rows(&series, t - w..t)).unwrap();
            let pred = ffm_forward(&model, &params, &past).unwrap().assemble(&spec, true);
            assert_eq!(got.scores[i], mse(pred.row(0), series.row(t)));
        }
        if spec.horizon == 1 {
            assert!(compatible);
            let windows = make_windows(&series, w, 1, Direction::Forward).unwrap();
            assert_eq!(forward_score(&model, &params, &windows).unwrap().scores, got.scores);
        }
    }
}

pub fn log_stabilized_scores_match_brute_force() {
    for seed in 0..CASES {
        let mut r = rng(seed + 3000);
        let n = r.random_range(1..30);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0.0..50.0)).collect();
        let s = ScoreSeries { scores: scores.clone(), alignment: Alignment::ForecastTarget, first: 3 };
        let got = log_stabilize(&s).unwrap();
        let want: Vec<f64> = scores.iter().map(|&x| (1.0 + x).ln()).collect();
        for (g, w) in got.scores.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-15 * w.abs().max(1.0));
        }
        assert_eq!(got.scores, scores.iter().map(|x| x.ln_1p()).collect::<Vec<_>>());
        assert_eq!(got.first, 3);
    }
}

pub fn topk_matches_brute_force() {
    for seed in 0..CASES {
        let mut r = rng(seed + 4000);
        let n = r.random_range(0..25);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64 * 0.5).collect();
        for k in 0..=n + 2 {
            let got = topk_flags(&scores, k);
            assert_eq!(got, brute_topk(&scores, k));
            assert_eq!(got.iter().map(|&f| f as usize).sum::<usize>(), k.min(n));
        }
    }
}

pub fn topk_set_is_invariant_under_log_transform() {
    let alphabet = [0.0, 0.25, 1.0, 7.5];
    for n in 0..=10usize {
        let total = alphabet.len().pow(n as u32);
        let step = if n <= 8 { 1 } else { 7 };
        for code in (0..total).step_by(step) {
            let mut c = code;
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    let v = alphabet[c % alphabet.len()];
                    c /= alphabet.len();
                    v
                })
                .collect();
            let logged: Vec<f64> = scores.iter().map(|s| s.ln_1p()).collect();
            for k in 0..=5 {
                assert_eq!(topk_flags(&scores, k), topk_flags(&logged, k), "{scores:?} k={k}");
            }
        }
    }
}

pub fn quantile_and_threshold_flags() {
    for seed in 0..CASES {
        let mut r = rng(seed + 5000);
        let n = r.random_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let q = r.random_range(0.0..=1.0);
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let h = (n - 1) as f64 * q;
        let lo = h.floor() as usize;
        let want = sorted[lo] + (h - lo as f64) * (sorted[(lo + 1).min(n - 1)] - sorted[lo]);
        let got = quantile(&v, q).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        let flags = threshold_flags(&v, got);
        for (f, x) in flags.iter().zip(&v) {
            assert_eq!(*f == 1, *x > got);
        }
    }
    assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
    assert_eq!(quantile(&[1.0, 2.0], 0.99).unwrap(), 1.99);
}

pub fn posthoc_detectors_score_flattened_predictions() {
    for (seed, kind) in [DetectorKind::Ecod, DetectorKind::Gmm, DetectorKind::Svdd].into_iter().enumerate() {
        let mut r = rng(seed as u64 + 6000);
        let spec = random_spec(&mut r, Direction::Forward);
        let model = Model::new(spec.clone()).unwrap();
        let params = model.init_params(3);
        let train = TimeSeries::new(random_input(&mut r, &spec, 60), None).unwrap();
        let test = TimeSeries::new(random_input(&mut r, &spec, 30), None).unwrap();
        let tw = make_windows(&train, spec.window, spec.horizon, Direction::Forward).unwrap();
        let sw = make_windows(&test, spec.window, spec.horizon, Direction::Forward).unwrap();
        let train_flat = flatten_predictions(&predict_windows(&model, &params, &tw).unwrap()).unwrap();
        let preds = predict_windows(&model, &params, &sw).unwrap();
        let test_flat = flatten_predictions(&preds).unwrap();
        assert_eq!(test_flat.shape(), [sw.len(), spec.horizon * spec.n_features()]);
        let cfg = DetectorConfig { gmm_components: 2, ..DetectorConfig::with_kind(kind) };
        let (det, scores) = posthoc_detector_scores(&train_flat, &test_flat, &cfg).unwrap();
        let refit = FittedDetector::fit(&cfg, &train_flat).unwrap();
        for (i, p) in preds.iter().enumerate() {
            assert_eq!(scores[i], refit.score(p.data()).unwrap());
        }
        assert_eq!(det.kind(), kind);
    }
}
