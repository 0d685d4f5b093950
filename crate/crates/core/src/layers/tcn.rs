use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Bound, Init, ParamId, ParamLayout};
use crate::tensor::{Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcnConfig {
    pub in_features: usize,
    pub channels: usize,
    pub layers: usize,
    pub kernel_size: usize,
    /// One dilation per layer; empty means doubling, `1, 2, 4, ...`.
    #[serde(default)]
    pub dilations: Vec<usize>,
}

impl TcnConfig {
    pub fn new(in_features: usize, channels: usize, layers: usize, kernel_size: usize) -> Self {
        TcnConfig { in_features, channels, layers, kernel_size, dilations: Vec::new() }
    }

    pub fn dilation(&self, layer: usize) -> usize {
        self.dilations.get(layer).copied().unwrap_or(1 << layer)
    }

    /// Rows of history seen by the last output row.
    pub fn receptive_field(&self) -> usize {
        1 + (0..self.layers).map(|l| (self.kernel_size - 1) * self.dilation(l)).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.kernel_size == 0 || self.channels == 0 || self.in_features == 0 {
            return Err(Error::config("tcn needs layers, kernel_size, channels and in_features >= 1"));
        }
        if !self.dilations.is_empty() && self.dilations.len() != self.layers {
            return Err(Error::config(format!(
                "tcn has {} layers but {} dilations",
                self.layers,
                self.dilations.len()
            )));
        }
        if self.dilations.contains(&0) {
            return Err(Error::config("tcn dilations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Block {
    kernel: ParamId,
    bias: ParamId,
    skip: Option<ParamId>,
    dilation: usize,
}

/// Stack of residual causal blocks: `y = skip(x) + relu(conv_d(x) + b)`,
/// where `skip` is the identity when channel counts agree and a learned
/// `1 x 1` projection otherwise.
#[derive(Clone, Debug)]
pub struct Tcn {
    cfg: TcnConfig,
    blocks: Vec<Block>,
}

impl Tcn {
    pub fn new(cfg: TcnConfig, layout: &mut ParamLayout, prefix: &str) -> Result<Self> {
        cfg.validate()?;
        let mut blocks = Vec::with_capacity(cfg.layers);
        let mut c_in = cfg.in_features;
        for l in 0..cfg.layers {
            let fan_in = c_in * cfg.kernel_size;
            let kernel = layout.add(
                format!("{prefix}.{l}.conv.weight"),
                &[cfg.channels, c_in, cfg.kernel_size],
                Init::fan_in(fan_in),
            );
            let bias = layout.add(format!("{prefix}.{l}.conv.bias"), &[cfg.channels], Init::fan_in(fan_in));
            let skip = (c_in != cfg.channels)
                .then(|| layout.add(format!("{prefix}.{l}.skip.weight"), &[c_in, cfg.channels], Init::fan_in(c_in)));
            blocks.push(Block { kernel, bias, skip, dilation: cfg.dilation(l) });
            c_in = cfg.channels;
        }
        Ok(Tcn { cfg, blocks })
    }

    pub fn config(&self) -> &TcnConfig {
        &self.cfg
    }

    /// `[T, D] -> [T, C]`, causal in time.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let s = tape.shape(x);
        if s.len() != 2 || s[0] == 0 || s[1] != self.cfg.in_features {
            return Err(Error::Shape { op: "tcn_forward", lhs: s.to_vec(), rhs: vec![self.cfg.in_features] });
        }
        let mut h = x;
        for b in &self.blocks {
            let conv = tape.causal_dilated_conv1d(h, p[b.kernel], b.dilation)?;
            let conv = tape.add_bias(conv, p[b.bias])?;
            let act = tape.relu(conv)?;
            let skip = match b.skip {
                Some(w) => tape.matmul(h, p[w])?,
                None => h,
            };
            h = tape.add(skip, act)?;
        }
        Ok(h)
    }
}
