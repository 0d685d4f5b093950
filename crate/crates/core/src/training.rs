//! Adam with coupled L2 weight decay, global-norm gradient clipping and a
//! seeded mini-batch epoch loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::params::ModelParams;
use crate::tensor::Tape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            epochs: 5,
            clip_norm: 1.0,
            batch_size: 64,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::config("adam betas must lie in [0, 1) and epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState { m: zeros(), v: zeros(), step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Weight decay is added to the gradient
/// as `weight_decay * theta` before the moments are updated.
pub fn adam_step(params: &mut ModelParams, grads: &[Vec<f64>], state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape { op: "adam_step", lhs: vec![params.len()], rhs: vec![grads.len()] });
    }
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for ((name, g), (_, t)) in names.iter().zip(grads).zip(params.iter()) {
        if g.len() != t.len() {
            return Err(Error::Shape { op: "adam_step", lhs: t.shape().to_vec(), rhs: vec![g.len()] });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient for parameter {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, tensor) in params.tensors_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (i, theta) in tensor.data_mut().iter_mut().enumerate() {
            let g = grads[k][i] + cfg.weight_decay * *theta;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

pub fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

/// Mean loss over the windows at `indices` and its gradient for every
/// parameter tensor.
pub fn batch_gradients(
    model: &Model,
    params: &ModelParams,
    windows: &WindowSet<'_>,
    indices: &[usize],
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if indices.is_empty() {
        return Err(Error::data("empty batch"));
    }
    if windows.direction() != model.spec().direction
        || windows.window() != model.spec().window
        || windows.horizon() != model.spec().horizon
    {
        return Err(Error::config("window set does not match the model's direction, window and horizon"));
    }
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true)?;
    let mut rng = dropout_rng;
    let mut total = None;
    for &i in indices {
        let x = tape.constant(windows.input(i))?;
        let trace = model.forward(&mut tape, &bound, x, rng.as_mut().map(|r| &mut **r as &mut dyn rand::RngCore))?;
        let l = model.loss(&mut tape, &trace.heads, &windows.target(i))?;
        total = Some(match total {
            None => l,
            Some(acc) => tape.add(acc, l)?,
        });
    }
    let loss = tape.scale(total.expect("non-empty batch"), 1.0 / indices.len() as f64)?;
    let value = tape.value(loss).item();
    tape.backward(loss)?;
    let grads = bound
        .vars()
        .iter()
        .zip(params.iter())
        .map(|(&v, (_, t))| tape.grad(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();
    Ok((value, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

impl std::fmt::Display for TrainLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (e, l) in self.epoch_losses.iter().enumerate() {
            writeln!(f, "epoch {} loss {l:.6}", e + 1)?;
        }
        Ok(())
    }
}

/// Trains `params` in place on every window of `windows`, reshuffled each epoch.
pub fn train(model: &Model, params: &mut ModelParams, windows: &WindowSet<'_>, cfg: &TrainConfig) -> Result<TrainLog> {
    train_with(model, params, windows, cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with(
    model: &Model,
    params: &mut ModelParams,
    windows: &WindowSet<'_>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainLog> {
    cfg.validate()?;
    model.layout().validate(params)?;
    if windows.is_empty() {
        return Err(Error::data("no training windows"));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut state = AdamState::new(params);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let located = |e: Error| match e {
                Error::NonFinite { op } => {
                    Error::Numeric(format!("epoch {} batch {}: non-finite value in {op}", epoch + 1, b + 1))
                }
                Error::Numeric(msg) => Error::Numeric(format!("epoch {} batch {}: {msg}", epoch + 1, b + 1)),
                other => other,
            };
            let (loss, mut grads) =
                batch_gradients(model, params, windows, chunk, Some(&mut dropout_rng)).map_err(located)?;
            clip_gradients(&mut grads, cfg.clip_norm);
            adam_step(params, &grads, &mut state, cfg).map_err(located)?;
            sum += loss;
            batches += 1;
        }
        let mean = sum / batches as f64;
        on_epoch(epoch + 1, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainLog { epoch_losses, steps: state.steps() })
}
