use rand::RngCore;

use crate::error::{Error, Result};
use crate::layers::{mean_pool, DualHeads, Gru, HeadOutput, Tcn, TransformerEncoder};
use crate::params::{Bound, ModelParams, ParamLayout};
use crate::tensor::{logistic, Tape, Tensor, Var};

use super::loss::hybrid_loss;
use super::spec::{Direction, ModelSpec};

/// Architecture instance: parameter layout plus the layer graph.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    layout: ParamLayout,
    tcn: Tcn,
    gru: Gru,
    encoder: TransformerEncoder,
    heads: DualHeads,
}

/// Every intermediate of one forward pass.
pub struct ForwardTrace {
    /// `[R_in, C]`.
    pub tcn: Var,
    /// `[R_in, H_gru]`.
    pub gru: Var,
    /// `[R_in, H_gru]`.
    pub encoded: Var,
    /// Attention matrices per layer and head, `[R_in, R_in]`.
    pub attention: Vec<Vec<Var>>,
    /// `[H_gru]`.
    pub pooled: Var,
    pub heads: HeadOutput,
}

/// Model output on the value level.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `[R_out, D_cont]`.
    pub cont: Option<Tensor>,
    /// `[R_out, D_disc]` logits.
    pub disc_logits: Option<Tensor>,
}

impl Prediction {
    /// `[R_out, D]` in original column order; discrete columns hold logits
    /// when `probabilities` is false and `sigmoid(logit)` when it is true.
    pub fn assemble(&self, spec: &ModelSpec, probabilities: bool) -> Tensor {
        let d = spec.n_features();
        let rows = spec.output_rows();
        let mut out = vec![0.0; rows * d];
        if let Some(c) = &self.cont {
            for r in 0..rows {
                for (j, &col) in spec.continuous.iter().enumerate() {
                    out[r * d + col] = c.get(r, j);
                }
            }
        }
        if let Some(l) = &self.disc_logits {
            for r in 0..rows {
                for (j, &col) in spec.discrete.iter().enumerate() {
                    let v = l.get(r, j);
                    out[r * d + col] = if probabilities { logistic(v) } else { v };
                }
            }
        }
        Tensor::from_parts(vec![rows, d], out)
    }
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut layout = ParamLayout::new();
        let tcn = Tcn::new(spec.tcn.clone(), &mut layout, "tcn")?;
        let gru = Gru::new(spec.gru.clone(), &mut layout, "gru")?;
        let encoder = TransformerEncoder::new(spec.transformer.clone(), &mut layout, "encoder")?;
        let heads = DualHeads::new(
            &mut layout,
            "heads",
            spec.gru.hidden_size,
            spec.output_rows(),
            spec.continuous.len(),
            spec.discrete.len(),
        )?;
        Ok(Model { spec, layout, tcn, gru, encoder, heads })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn heads(&self) -> &DualHeads {
        &self.heads
    }

    pub fn init_params(&self, seed: u64) -> ModelParams {
        self.layout.init(seed)
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = [self.spec.input_rows(), self.spec.n_features()];
        if shape != want {
            return Err(Error::Shape {
                op: match self.spec.direction {
                    Direction::Forward => "ffm_forward",
                    Direction::Backward => "brm_forward",
                },
                lhs: shape.to_vec(),
                rhs: want.to_vec(),
            });
        }
        Ok(())
    }

    /// Full pipeline on one input window. Dropout on the pooled latent is
    /// applied only when `dropout_rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardTrace> {
        self.check_input(tape.shape(x))?;
        let tcn = self.tcn.forward(tape, p, x)?;
        let gru = self.gru.forward(tape, p, tcn)?;
        let enc = self.encoder.forward_traced(tape, p, gru)?;
        let pooled = mean_pool(tape, enc.output)?;
        let latent = match dropout_rng {
            Some(rng) if self.spec.dropout > 0.0 => tape.dropout_seeded(pooled, self.spec.dropout, rng)?,
            _ => pooled,
        };
        let heads = self.heads.forward(tape, p, latent)?;
        Ok(ForwardTrace { tcn, gru, encoded: enc.output, attention: enc.attention, pooled, heads })
    }

    /// Hybrid loss of `out` against a `[R_out, D]` target in original column order.
    pub fn loss(&self, tape: &mut Tape, out: &HeadOutput, target: &Tensor) -> Result<Var> {
        let want = [self.spec.output_rows(), self.spec.n_features()];
        if target.shape() != want {
            return Err(Error::Shape { op: "hybrid_loss", lhs: target.shape().to_vec(), rhs: want.to_vec() });
        }
        let split = |tape: &mut Tape, cols: &[usize]| -> Result<Option<Var>> {
            if cols.is_empty() {
                return Ok(None);
            }
            tape.constant(target.select_cols(cols)).map(Some)
        };
        let tc = split(tape, &self.spec.continuous)?;
        let td = split(tape, &self.spec.discrete)?;
        hybrid_loss(tape, out.cont, tc, out.disc, td, self.spec.alpha, self.spec.beta, self.spec.huber_delta)
    }

    /// Inference helper that binds `params` once and reuses the tape.
    pub fn predictor(&self, params: &ModelParams) -> Result<Predictor<'_>> {
        self.layout.validate(params)?;
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false)?;
        let mark = tape.len();
        Ok(Predictor { model: self, tape, bound, mark })
    }
}

pub struct Predictor<'a> {
    model: &'a Model,
    tape: Tape,
    bound: Bound,
    mark: usize,
}

impl Predictor<'_> {
    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn predict(&mut self, input: &Tensor) -> Result<Prediction> {
        self.model.check_input(input.shape())?;
        let result = (|| {
            let x = self.tape.constant(input.clone())?;
            let trace = self.model.forward(&mut self.tape, &self.bound, x, None)?;
            let grab = |v: Option<Var>| v.map(|v| self.tape.value(v).clone());
            Ok(Prediction { cont: grab(trace.heads.cont), disc_logits: grab(trace.heads.disc) })
        })();
        self.tape.truncate(self.mark);
        result
    }

    /// Multiplications counted across every forward pass made so far.
    pub fn multiplications(&self) -> u64 {
        self.tape.multiplications()
    }
}

/// Forecast the next `H` rows from a `[W, D]` past window.
pub fn ffm_forward(model: &Model, params: &ModelParams, x_past: &Tensor) -> Result<Prediction> {
    if model.spec().direction != Direction::Forward {
        return Err(Error::config("ffm_forward needs a forward model"));
    }
    model.predictor(params)?.predict(x_past)
}

/// Reconstruct the `[W, D]` past window from a `[H, D]` future window;
/// discrete columns of the result are logits.
pub fn brm_forward(model: &Model, params: &ModelParams, x_future: &Tensor) -> Result<Tensor> {
    if model.spec().direction != Direction::Backward {
        return Err(Error::config("brm_forward needs a backward model"));
    }
    let pred = model.predictor(params)?.predict(x_future)?;
    Ok(pred.assemble(model.spec(), false))
}
