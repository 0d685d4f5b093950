#![allow(dead_code)]

use prescient::data::{infer_schema, make_windows, normalize, SynthKind, SynthOptions, Synthesized, TimeSeries};
use prescient::models::{Direction, Model, ModelSpec};
use prescient::params::ModelParams;
use prescient::tensor::{Tape, Tensor, Var};
use prescient::training::{train, TrainConfig};
use prescient::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// `sum(x * w)` for a fixed random `w`.
pub fn project(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let w = random_tensor(&mut rng(seed ^ 0x9e37), tape.shape(x), 1.0);
    let w = tape.constant(w)?;
    let p = tape.mul(x, w)?;
    tape.sum(p)
}

pub const FD_STEP: f64 = 1e-6;
/// Denominator floor of the relative error; below it the error is absolute.
pub const REL_FLOOR: f64 = 1e-3;
/// Coordinates checked per input tensor.
pub const MAX_COORDS: usize = 24;

#[derive(Clone, Debug, Default)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst: (f64, f64),
}

/// Central finite-difference check of `f` with respect to every input.
/// `f` receives one tape leaf per input and returns a scalar.
pub fn gradcheck(inputs: &[Tensor], seed: u64, f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> GradCheck {
    let eval = |xs: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone()).unwrap()).collect();
        let out = f(&mut tape, &vars).unwrap();
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone()).unwrap()).collect();
    let out = f(&mut tape, &vars).unwrap();
    tape.backward(out).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| tape.grad(v).map_or_else(|| vec![0.0; x.len()], <[f64]>::to_vec))
        .collect();
    let mut pick = rng(seed);
    let mut report = GradCheck::default();
    let mut xs = inputs.to_vec();
    for (i, x) in inputs.iter().enumerate() {
        let coords: Vec<usize> = if x.len() <= MAX_COORDS {
            (0..x.len()).collect()
        } else {
            (0..MAX_COORDS).map(|_| pick.random_range(0..x.len())).collect()
        };
        for c in coords {
            let orig = x.data()[c];
            xs[i].data_mut()[c] = orig + FD_STEP;
            let up = eval(&xs);
            xs[i].data_mut()[c] = orig - FD_STEP;
            let down = eval(&xs);
            xs[i].data_mut()[c] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[i][c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (a, numeric);
            }
            report.checked += 1;
        }
    }
    report
}

/// Parameters of `params` followed by `extra`, as one input list for [`gradcheck`].
pub fn with_params(extra: &[Tensor], params: &ModelParams) -> Vec<Tensor> {
    extra.iter().cloned().chain(params.iter().map(|(_, t)| t.clone())).collect()
}

/// A small random valid spec for property tests.
pub fn random_spec(rng: &mut ChaCha8Rng, direction: Direction) -> ModelSpec {
    let d = rng.random_range(1..=5);
    let n_disc = rng.random_range(0..d);
    let mut cols: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        cols.swap(i, rng.random_range(0..=i));
    }
    let (disc, cont) = cols.split_at(n_disc);
    let (mut cont, mut disc) = (cont.to_vec(), disc.to_vec());
    cont.sort();
    disc.sort();
    let heads = rng.random_range(1..=3);
    let hidden = heads * rng.random_range(1..=4);
    let mut spec = ModelSpec::with_sizes(
        direction,
        rng.random_range(2..=8),
        rng.random_range(1..=3),
        cont,
        disc,
        rng.random_range(1..=6),
        rng.random_range(1..=3),
        hidden,
    );
    spec.tcn.kernel_size = rng.random_range(1..=3);
    spec.transformer.heads = heads;
    spec.transformer.feedforward_dim = rng.random_range(1..=12);
    spec.transformer.layers = rng.random_range(1..=2);
    spec
}

/// Random `[rows, D]` input matching `spec`, with 0/1 values in discrete columns.
pub fn random_input(rng: &mut ChaCha8Rng, spec: &ModelSpec, rows: usize) -> Tensor {
    let d = spec.n_features();
    let mut t = random_tensor(rng, &[rows, d], 1.5);
    for r in 0..rows {
        for &c in &spec.discrete {
            t.data_mut()[r * d + c] = rng.random_range(0..2) as f64;
        }
    }
    t
}

pub fn brute_point(flags: &[u8], labels: &[u8]) -> (f64, f64, f64) {
    let tp = flags.iter().zip(labels).filter(|&(&f, &l)| f == 1 && l == 1).count() as f64;
    let fp = flags.iter().zip(labels).filter(|&(&f, &l)| f == 1 && l == 0).count() as f64;
    let fneg = flags.iter().zip(labels).filter(|&(&f, &l)| f == 0 && l == 1).count() as f64;
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    (p, r, harmonic(p, r))
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Maximal runs of ones as half-open ranges.
pub fn runs(x: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < x.len() {
        if x[t] == 1 {
            let s = t;
            while t < x.len() && x[t] == 1 {
                t += 1;
            }
            out.push((s, t));
        } else {
            t += 1;
        }
    }
    out
}

pub fn brute_composite(flags: &[u8], labels: &[u8]) -> f64 {
    let (p, _, _) = brute_point(flags, labels);
    let events = runs(labels);
    let hit = events.iter().filter(|&&(s, e)| (s..e).any(|t| flags[t] == 1)).count();
    let r = if events.is_empty() { 0.0 } else { hit as f64 / events.len() as f64 };
    harmonic(p, r)
}

fn credit(range: (usize, usize), other: &[u8]) -> f64 {
    let hit = (range.0..range.1).filter(|&t| other[t] == 1).count();
    0.5 * if hit > 0 { 1.0 } else { 0.0 } + 0.5 * hit as f64 / (range.1 - range.0) as f64
}

pub fn brute_range(flags: &[u8], labels: &[u8]) -> (f64, f64, f64) {
    let mean = |ranges: Vec<(usize, usize)>, other: &[u8]| {
        if ranges.is_empty() {
            0.0
        } else {
            let n = ranges.len() as f64;
            ranges.into_iter().map(|r| credit(r, other)).sum::<f64>() / n
        }
    };
    let r = mean(runs(labels), flags);
    let p = mean(runs(flags), labels);
    (p, r, harmonic(p, r))
}

/// Top-K by repeated argmax, first index winning ties.
pub fn brute_topk(scores: &[f64], k: usize) -> Vec<u8> {
    let mut flags = vec![0u8; scores.len()];
    for _ in 0..k.min(scores.len()) {
        let mut best: Option<usize> = None;
        for (i, &s) in scores.iter().enumerate() {
            if flags[i] == 0 && best.is_none_or(|b| s > scores[b]) {
                best = Some(i);
            }
        }
        flags[best.unwrap()] = 1;
    }
    flags
}

pub const SYNTH_LEN: usize = 5000;
pub const SYNTH_FEATURES: usize = 4;
pub const SYNTH_RATE: f64 = 0.03;

/// The end-to-end synthetic benchmark setup: clean train split, anomalous test split.
pub fn synth_benchmark(seed: u64) -> (TimeSeries, Synthesized) {
    SynthOptions::new(SynthKind::SineSpike, SYNTH_FEATURES, SYNTH_RATE, seed).pair(SYNTH_LEN, SYNTH_LEN).unwrap()
}

pub struct Trained {
    pub model: Model,
    pub params: ModelParams,
    pub train: TimeSeries,
    pub test: TimeSeries,
}

/// Trains a default-architecture model with the default recipe on the
/// normalized train split and rounds it to checkpoint precision.
pub fn train_default(direction: Direction, train_raw: &TimeSeries, test_raw: &TimeSeries, seed: u64) -> Trained {
    let schema = infer_schema(train_raw, 2);
    let spec = ModelSpec::new(direction, 5, 1, schema.continuous.clone(), schema.discrete.clone());
    let model = Model::new(spec).unwrap();
    let train_n = normalize(train_raw, &schema).unwrap();
    let test_n = normalize(test_raw, &schema).unwrap();
    let windows = make_windows(&train_n, 5, 1, direction).unwrap();
    let mut params = model.init_params(seed);
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    train(&model, &mut params, &windows, &cfg).unwrap();
    params.round_to_f32();
    Trained { model, params, train: train_n, test: test_n }
}
