use crate::error::{Error, Result};
use crate::params::{Bound, Init, ParamId, ParamLayout};
use crate::tensor::{Tape, Var};

/// Affine map `x W + b` over the last axis of a 2-D input.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        let init = Init::fan_in(in_dim);
        Linear {
            weight: layout.add(format!("{prefix}.weight"), &[in_dim, out_dim], init),
            bias: layout.add(format!("{prefix}.bias"), &[out_dim], init),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let y = tape.matmul(x, p[self.weight])?;
        tape.add_bias(y, p[self.bias])
    }
}

/// Average over the time axis: `[T, d] -> [d]`.
pub fn mean_pool(tape: &mut Tape, z: Var) -> Result<Var> {
    let s = tape.shape(z);
    if s.len() != 2 || s[0] == 0 {
        return Err(Error::Shape { op: "mean_pool", lhs: s.to_vec(), rhs: vec![] });
    }
    tape.mean_over_axis(z, 0)
}

/// Outputs of [`DualHeads::forward`]; a head is absent when its feature class is empty.
#[derive(Clone, Copy, Debug)]
pub struct HeadOutput {
    /// `[rows, n_cont]`.
    pub cont: Option<Var>,
    /// `[rows, n_disc]` logits.
    pub disc: Option<Var>,
}

/// Two independent linear heads from a pooled latent to `rows` output rows
/// of continuous values and of discrete logits.
#[derive(Clone, Debug)]
pub struct DualHeads {
    rows: usize,
    n_cont: usize,
    n_disc: usize,
    cont: Option<Linear>,
    disc: Option<Linear>,
}

impl DualHeads {
    pub fn new(
        layout: &mut ParamLayout,
        prefix: &str,
        latent: usize,
        rows: usize,
        n_cont: usize,
        n_disc: usize,
    ) -> Result<Self> {
        if rows == 0 {
            return Err(Error::config("output heads need at least one row"));
        }
        if n_cont + n_disc == 0 {
            return Err(Error::config("output heads need at least one feature"));
        }
        Ok(DualHeads {
            rows,
            n_cont,
            n_disc,
            cont: (n_cont > 0).then(|| Linear::new(layout, &format!("{prefix}.cont"), latent, rows * n_cont)),
            disc: (n_disc > 0).then(|| Linear::new(layout, &format!("{prefix}.disc"), latent, rows * n_disc)),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cont_head(&self) -> Option<&Linear> {
        self.cont.as_ref()
    }

    pub fn disc_head(&self) -> Option<&Linear> {
        self.disc.as_ref()
    }

    /// `z` is the pooled `[d]` latent.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<HeadOutput> {
        let d = tape.shape(z).to_vec();
        if d.len() != 1 {
            return Err(Error::Shape { op: "dual_heads", lhs: d, rhs: vec![] });
        }
        let z2 = tape.reshape(z, &[1, d[0]])?;
        let mut run = |head: &Option<Linear>, n: usize| -> Result<Option<Var>> {
            head.as_ref()
                .map(|h| {
                    let y = h.forward(tape, p, z2)?;
                    tape.reshape(y, &[self.rows, n])
                })
                .transpose()
        };
        Ok(HeadOutput { cont: run(&self.cont, self.n_cont)?, disc: run(&self.disc, self.n_disc)? })
    }
}
