use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Bound, Init, ParamId, ParamLayout};
use crate::tensor::{Tape, Tensor, Var};

use super::heads::Linear;

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionalEncoding {
    None,
    Sinusoidal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub model_dim: usize,
    pub heads: usize,
    pub feedforward_dim: usize,
    pub layers: usize,
    pub positional_encoding: PositionalEncoding,
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.model_dim == 0 || self.feedforward_dim == 0 {
            return Err(Error::config("transformer needs layers, heads, model_dim and feedforward_dim >= 1"));
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "transformer model_dim {} is not divisible by {} heads",
                self.model_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }
}

/// `[rows, dim]` table with `sin` on even columns and `cos` on odd columns.
pub fn sinusoidal_encoding(rows: usize, dim: usize) -> Tensor {
    let mut data = vec![0.0; rows * dim];
    for pos in 0..rows {
        for i in 0..dim {
            let freq = 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = pos as f64 / freq;
            data[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::from_parts(vec![rows, dim], data)
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    qkv: Linear,
    out: Linear,
    norm1: (ParamId, ParamId),
    ff1: Linear,
    ff2: Linear,
    norm2: (ParamId, ParamId),
}

/// Post-norm encoder: full (unmasked) multi-head self-attention with
/// residual and layer norm, then a GELU feedforward with residual and layer
/// norm.
#[derive(Clone, Debug)]
pub struct TransformerEncoder {
    cfg: TransformerConfig,
    layers: Vec<EncoderLayer>,
}

/// Encoder output plus the attention matrices, `[layer][head]`, each `[T, T]`.
pub struct EncoderTrace {
    pub output: Var,
    pub attention: Vec<Vec<Var>>,
}

impl TransformerEncoder {
    pub fn new(cfg: TransformerConfig, layout: &mut ParamLayout, prefix: &str) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.model_dim;
        let f = cfg.feedforward_dim;
        let layers = (0..cfg.layers)
            .map(|l| {
                let p = format!("{prefix}.{l}");
                EncoderLayer {
                    qkv: Linear::new(layout, &format!("{p}.attn.qkv"), d, 3 * d),
                    out: Linear::new(layout, &format!("{p}.attn.out"), d, d),
                    norm1: (
                        layout.add(format!("{p}.norm1.gamma"), &[d], Init::Ones),
                        layout.add(format!("{p}.norm1.beta"), &[d], Init::Zeros),
                    ),
                    ff1: Linear::new(layout, &format!("{p}.ff1"), d, f),
                    ff2: Linear::new(layout, &format!("{p}.ff2"), f, d),
                    norm2: (
                        layout.add(format!("{p}.norm2.gamma"), &[d], Init::Ones),
                        layout.add(format!("{p}.norm2.beta"), &[d], Init::Zeros),
                    ),
                }
            })
            .collect();
        Ok(TransformerEncoder { cfg, layers })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.cfg
    }

    /// `[T, d] -> [T, d]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        Ok(self.forward_traced(tape, p, x)?.output)
    }

    pub fn forward_traced(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<EncoderTrace> {
        let s = tape.shape(x).to_vec();
        let d = self.cfg.model_dim;
        if s.len() != 2 || s[0] == 0 || s[1] != d {
            return Err(Error::Shape { op: "transformer_forward", lhs: s, rhs: vec![d] });
        }
        let rows = s[0];
        let mut h = x;
        if self.cfg.positional_encoding == PositionalEncoding::Sinusoidal {
            let pe = tape.constant(sinusoidal_encoding(rows, d))?;
            h = tape.add(h, pe)?;
        }
        let dh = self.cfg.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let mut attention = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let qkv = layer.qkv.forward(tape, p, h)?;
            let mut heads = Vec::with_capacity(self.cfg.heads);
            let mut weights = Vec::with_capacity(self.cfg.heads);
            for k in 0..self.cfg.heads {
                let q = tape.slice(qkv, 1, k * dh, dh)?;
                let key = tape.slice(qkv, 1, d + k * dh, dh)?;
                let v = tape.slice(qkv, 1, 2 * d + k * dh, dh)?;
                let kt = tape.transpose(key)?;
                let scores = tape.matmul(q, kt)?;
                let scores = tape.scale(scores, inv_sqrt)?;
                let a = tape.softmax_over_axis(scores, 1)?;
                heads.push(tape.matmul(a, v)?);
                weights.push(a);
            }
            let merged = if heads.len() == 1 { heads[0] } else { tape.concat(&heads, 1)? };
            let attn = layer.out.forward(tape, p, merged)?;
            let res = tape.add(h, attn)?;
            h = tape.layer_norm(res, p[layer.norm1.0], p[layer.norm1.1], LN_EPS)?;
            let ff = layer.ff1.forward(tape, p, h)?;
            let ff = tape.gelu(ff)?;
            let ff = layer.ff2.forward(tape, p, ff)?;
            let res = tape.add(h, ff)?;
            h = tape.layer_norm(res, p[layer.norm2.0], p[layer.norm2.1], LN_EPS)?;
            attention.push(weights);
        }
        Ok(EncoderTrace { output: h, attention })
    }
}
