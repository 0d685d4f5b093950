use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Bound, Init, ParamId, ParamLayout};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    pub input_size: usize,
    pub hidden_size: usize,
}

impl GruConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.input_size == 0 {
            return Err(Error::config("gru input_size and hidden_size must be >= 1"));
        }
        Ok(())
    }
}

/// Single-layer GRU over a `[T, input]` sequence starting from a zero state.
///
/// Gate columns are laid out as `[reset | update | candidate]`:
///
/// ```text
/// r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
/// z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
/// n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug)]
pub struct Gru {
    cfg: GruConfig,
    w_ih: ParamId,
    b_ih: ParamId,
    w_hh: ParamId,
    b_hh: ParamId,
}

impl Gru {
    pub fn new(cfg: GruConfig, layout: &mut ParamLayout, prefix: &str) -> Result<Self> {
        cfg.validate()?;
        let (i, h) = (cfg.input_size, cfg.hidden_size);
        let init = Init::fan_in(h);
        Ok(Gru {
            w_ih: layout.add(format!("{prefix}.w_ih"), &[i, 3 * h], init),
            b_ih: layout.add(format!("{prefix}.b_ih"), &[3 * h], init),
            w_hh: layout.add(format!("{prefix}.w_hh"), &[h, 3 * h], init),
            b_hh: layout.add(format!("{prefix}.b_hh"), &[3 * h], init),
            cfg,
        })
    }

    pub fn config(&self) -> &GruConfig {
        &self.cfg
    }

    /// `[T, input] -> [T, hidden]`: the full hidden-state sequence.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let s = tape.shape(x);
        if s.len() != 2 || s[0] == 0 || s[1] != self.cfg.input_size {
            return Err(Error::Shape { op: "gru_forward", lhs: s.to_vec(), rhs: vec![self.cfg.input_size] });
        }
        let steps = s[0];
        let hs = self.cfg.hidden_size;
        let xi = tape.matmul(x, p[self.w_ih])?;
        let xi = tape.add_bias(xi, p[self.b_ih])?;
        let mut h = tape.constant(Tensor::zeros(&[1, hs]))?;
        let mut states = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = tape.slice(xi, 0, t, 1)?;
            let hh = tape.matmul(h, p[self.w_hh])?;
            let hh = tape.add_bias(hh, p[self.b_hh])?;
            let gate = |tape: &mut Tape, k: usize| -> Result<(Var, Var)> {
                Ok((tape.slice(xt, 1, k * hs, hs)?, tape.slice(hh, 1, k * hs, hs)?))
            };
            let (xr, hr) = gate(tape, 0)?;
            let (xz, hz) = gate(tape, 1)?;
            let (xn, hn) = gate(tape, 2)?;
            let r = tape.add(xr, hr)?;
            let r = tape.sigmoid(r)?;
            let z = tape.add(xz, hz)?;
            let z = tape.sigmoid(z)?;
            let rn = tape.mul(r, hn)?;
            let n = tape.add(xn, rn)?;
            let n = tape.tanh(n)?;
            let keep = tape.scale(z, -1.0)?;
            let keep = tape.add_scalar(keep, 1.0)?;
            let fresh = tape.mul(keep, n)?;
            let carried = tape.mul(z, h)?;
            h = tape.add(fresh, carried)?;
            states.push(h);
        }
        tape.concat(&states, 0)
    }
}
