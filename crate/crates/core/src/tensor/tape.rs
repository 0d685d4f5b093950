use rand::Rng;

use super::{axis_extents, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Transpose(Var),
    Reshape(Var),
    Sum(Var),
    MeanAxis { input: Var, axis: usize },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Gelu(Var),
    Softmax { input: Var, axis: usize },
    LayerNorm { input: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Dropout { input: Var, scale: Vec<f64> },
    Conv1d { input: Var, kernel: Var, dilation: usize },
    Huber { pred: Var, target: Var, delta: f64 },
    BceLogits { logits: Var, target: Var },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Ordered record of executed primitives (the gradient graph).
///
/// Nodes are appended in execution order, so a reverse sweep is a valid
/// topological replay. After [`Tape::backward`] the operation records are
/// dropped and the tape refuses further work until [`Tape::reset`].
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
    multiplications: u64,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn huber_psi(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        e
    } else {
        delta * e.signum()
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after `mark` (a previous [`Tape::len`]).
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    /// Clears all nodes so the tape can record a fresh forward pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Scalar multiplications performed by linear primitives (matmul, conv,
    /// elementwise mul, scale, dropout) since the tape was created.
    pub fn multiplications(&self) -> u64 {
        self.multiplications
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn grad_tensor(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| Tensor::from_parts(node.value.shape().to_vec(), g.clone()))
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push("leaf", value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, rg: bool) -> Result<Var> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op, requires_grad: rg, grad: None });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::from_parts(x.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let x = self.value(a);
        Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|&p| f(p)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_map(a, b, |p, q| p + q);
        let rg = self.rg(&[a, b]);
        self.push("add", out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_map(a, b, |p, q| p - q);
        let rg = self.rg(&[a, b]);
        self.push("sub", out, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_map(a, b, |p, q| p * q);
        self.multiplications += out.len() as u64;
        let rg = self.rg(&[a, b]);
        self.push("mul", out, Op::Mul(a, b), rg)
    }

    /// Multiplies by a scalar constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.map(a, |p| p * c);
        self.multiplications += out.len() as u64;
        let rg = self.rg(&[a]);
        self.push("scale", out, Op::Scale(a, c), rg)
    }

    /// Adds a scalar constant.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.map(a, |p| p + c);
        let rg = self.rg(&[a]);
        self.push("add_scalar", out, Op::AddScalar(a), rg)
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let av = x[i * k + p];
                let brow = &y[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        self.multiplications += (m * k * n) as u64;
        let rg = self.rg(&[a, b]);
        self.push("matmul", Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg)
    }

    /// Adds a 1-D bias to every row along the last axis of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sx.is_empty() || sb.len() != 1 || sx[sx.len() - 1] != sb[0] {
            return Err(shape_err("add_bias", sx, sb));
        }
        let n = sb[0];
        let b = self.value(bias).data();
        let xv = self.value(x);
        let data = xv.data().iter().enumerate().map(|(i, &v)| v + b[i % n]).collect();
        let out = Tensor::from_parts(xv.shape().to_vec(), data);
        let rg = self.rg(&[x, bias]);
        self.push("add_bias", out, Op::AddBias(x, bias), rg)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| Error::config("concat of zero tensors"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(shape_err("concat", &base, &[axis]));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible =
                s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(d, (p, q))| d == axis || p == q);
            if !compatible {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_extents(&shape, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let len = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * len..(o + 1) * len]);
            }
        }
        let rg = self.rg(inputs);
        self.push("concat", Tensor::from_parts(shape, data), Op::Concat { inputs: inputs.to_vec(), axis }, rg)
    }

    /// Elements `start..start + len` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(shape_err("slice", &s, &[axis, start, len]));
        }
        let (outer, alen, inner) = axis_extents(&s, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * alen + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let rg = self.rg(&[x]);
        self.push("slice", Tensor::from_parts(shape, data), Op::Slice { input: x, axis, start }, rg)
    }

    /// Swaps the two axes of a 2-D tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 {
            return Err(shape_err("transpose", s, &[2]));
        }
        let (m, n) = (s[0], s[1]);
        let src = self.value(x).data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        let rg = self.rg(&[x]);
        self.push("transpose", Tensor::from_parts(vec![n, m], data), Op::Transpose(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshaped(shape.to_vec())?;
        let rg = self.rg(&[x]);
        self.push("reshape", out, Op::Reshape(x), rg)
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f64 = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push("sum", Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Arithmetic mean along `axis`; the axis is removed from the shape.
    pub fn mean_over_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || s[axis] == 0 {
            return Err(shape_err("mean_over_axis", &s, &[axis]));
        }
        let (outer, alen, inner) = axis_extents(&s, axis);
        let src = self.value(x).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..alen {
                let row = &src[(o * alen + a) * inner..(o * alen + a + 1) * inner];
                for (d, &v) in data[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        let denom = alen as f64;
        for d in &mut data {
            *d /= denom;
        }
        let mut shape = s;
        shape.remove(axis);
        let rg = self.rg(&[x]);
        self.push("mean_over_axis", Tensor::from_parts(shape, data), Op::MeanAxis { input: x, axis }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.map(x, sigmoid);
        let rg = self.rg(&[x]);
        self.push("sigmoid", out, Op::Sigmoid(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let out = self.map(x, f64::tanh);
        let rg = self.rg(&[x]);
        self.push("tanh", out, Op::Tanh(x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.map(x, |v| v.max(0.0));
        let rg = self.rg(&[x]);
        self.push("relu", out, Op::Relu(x), rg)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = self.map(x, |v| 0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh()));
        let rg = self.rg(&[x]);
        self.push("gelu", out, Op::Gelu(x), rg)
    }

    pub fn softmax_over_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() {
            return Err(shape_err("softmax_over_axis", &s, &[axis]));
        }
        let (outer, alen, inner) = axis_extents(&s, axis);
        let src = self.value(x).data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |a: usize| (o * alen + a) * inner + i;
                let max = (0..alen).map(|a| src[idx(a)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for a in 0..alen {
                    let e = (src[idx(a)] - max).exp();
                    data[idx(a)] = e;
                    z += e;
                }
                for a in 0..alen {
                    data[idx(a)] /= z;
                }
            }
        }
        let rg = self.rg(&[x]);
        self.push("softmax_over_axis", Tensor::from_parts(s, data), Op::Softmax { input: x, axis }, rg)
    }

    /// Normalizes over the last axis, then applies `gamma * xhat + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let n = *s.last().ok_or_else(|| shape_err("layer_norm", &s, &[]))?;
        for p in [gamma, beta] {
            if self.shape(p) != [n] {
                return Err(shape_err("layer_norm", &s, self.shape(p)));
            }
        }
        let src = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let rows = src.len() / n.max(1);
        let mut xhat = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut data = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for j in 0..n {
                let h = (row[j] - mean) * inv;
                xhat[r * n + j] = h;
                data[r * n + j] = g[j] * h + b[j];
            }
        }
        let rg = self.rg(&[x, gamma, beta]);
        self.push("layer_norm", Tensor::from_parts(s, data), Op::LayerNorm { input: x, gamma, beta, xhat, inv_std }, rg)
    }

    /// Inverted dropout with an externally supplied 0/1 keep mask: kept
    /// elements are divided by `keep_prob`.
    pub fn dropout(&mut self, x: Var, mask: &[f64], keep_prob: f64) -> Result<Var> {
        let s = self.shape(x);
        if mask.len() != self.value(x).len() {
            return Err(shape_err("dropout", s, &[mask.len()]));
        }
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::config(format!("dropout keep probability {keep_prob} not in (0, 1]")));
        }
        let scale: Vec<f64> = mask.iter().map(|&m| m / keep_prob).collect();
        let xv = self.value(x);
        let data = xv.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        let out = Tensor::from_parts(xv.shape().to_vec(), data);
        self.multiplications += out.len() as u64;
        let rg = self.rg(&[x]);
        self.push("dropout", out, Op::Dropout { input: x, scale }, rg)
    }

    /// Draws a Bernoulli keep mask from `rng` and applies [`Tape::dropout`].
    pub fn dropout_seeded<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - rate;
        let mask: Vec<f64> =
            (0..self.value(x).len()).map(|_| if rng.random::<f64>() < keep { 1.0 } else { 0.0 }).collect();
        self.dropout(x, &mask, keep)
    }

    /// Causal dilated 1-D convolution.
    ///
    /// `x` is `[T, C_in]`, `kernel` is `[C_out, C_in, k]`. The input is
    /// implicitly left-padded by `(k - 1) * dilation` zeros so the output is
    /// `[T, C_out]` and output row `t` depends only on input rows `<= t`. Tap
    /// `j` reads input row `t - (k - 1 - j) * dilation`.
    pub fn causal_dilated_conv1d(&mut self, x: Var, kernel: Var, dilation: usize) -> Result<Var> {
        let (sx, sk) = (self.shape(x), self.shape(kernel));
        if sx.len() != 2 || sk.len() != 3 || sx[1] != sk[1] || sk[2] == 0 || dilation == 0 {
            return Err(shape_err("causal_dilated_conv1d", sx, sk));
        }
        let (t_len, c_in) = (sx[0], sx[1]);
        let (c_out, k) = (sk[0], sk[2]);
        let xv = self.value(x).data();
        let kv = self.value(kernel).data();
        let mut out = vec![0.0; t_len * c_out];
        let mut count = 0u64;
        for j in 0..k {
            let shift = (k - 1 - j) * dilation;
            if shift >= t_len {
                continue;
            }
            count += ((t_len - shift) * c_in * c_out) as u64;
            for t in shift..t_len {
                let xrow = &xv[(t - shift) * c_in..(t - shift + 1) * c_in];
                let orow = &mut out[t * c_out..(t + 1) * c_out];
                for (o, ov) in orow.iter_mut().enumerate() {
                    let kbase = o * c_in * k + j;
                    let mut acc = 0.0;
                    for (i, &xi) in xrow.iter().enumerate() {
                        acc += kv[kbase + i * k] * xi;
                    }
                    *ov += acc;
                }
            }
        }
        self.multiplications += count;
        let rg = self.rg(&[x, kernel]);
        self.push(
            "causal_dilated_conv1d",
            Tensor::from_parts(vec![t_len, c_out], out),
            Op::Conv1d { input: x, kernel, dilation },
            rg,
        )
    }

    /// Mean Huber loss over all elements.
    pub fn huber_mean(&mut self, pred: Var, target: Var, delta: f64) -> Result<Var> {
        self.same_shape("huber_mean", pred, target)?;
        if delta <= 0.0 {
            return Err(Error::config(format!("huber delta {delta} must be positive")));
        }
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let n = p.len().max(1) as f64;
        let total: f64 = p
            .iter()
            .zip(t)
            .map(|(a, b)| {
                let e = (a - b).abs();
                if e <= delta {
                    0.5 * e * e
                } else {
                    delta * (e - 0.5 * delta)
                }
            })
            .sum();
        let rg = self.rg(&[pred, target]);
        self.push("huber_mean", Tensor::scalar(total / n), Op::Huber { pred, target, delta }, rg)
    }

    /// Mean binary cross-entropy between `sigmoid(logits)` and `target`.
    pub fn bce_with_logits_mean(&mut self, logits: Var, target: Var) -> Result<Var> {
        self.same_shape("bce_with_logits_mean", logits, target)?;
        let (x, y) = (self.value(logits).data(), self.value(target).data());
        let n = x.len().max(1) as f64;
        let total: f64 = x.iter().zip(y).map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()).sum();
        let rg = self.rg(&[logits, target]);
        self.push("bce_with_logits_mean", Tensor::scalar(total / n), Op::BceLogits { logits, target }, rg)
    }

    /// Reverse sweep from a scalar `loss`. Populates the gradient of every
    /// reachable differentiable node, then clears the operation record.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::Detached);
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &g, &mut grads);
            self.nodes[i].grad = Some(g);
        }
        for node in &mut self.nodes {
            node.op = Op::Leaf;
        }
        self.consumed = true;
        Ok(())
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(s) = self.slot(grads, v) {
                        s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(s) = self.slot(grads, *a) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                }
                if let Some(s) = self.slot(grads, *b) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s -= g);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(s) = self.slot(grads, *a) {
                    for k in 0..s.len() {
                        s[k] += g[k] * bv[k];
                    }
                }
                if let Some(s) = self.slot(grads, *b) {
                    for k in 0..s.len() {
                        s[k] += g[k] * av[k];
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(s) = self.slot(grads, *a) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += c * g);
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if let Some(s) = self.slot(grads, *a) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                }
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(s) = self.slot(grads, *a) {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            s[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *b) {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let av = av[r * k + p];
                            let srow = &mut s[p * n..(p + 1) * n];
                            for (sv, &gv) in srow.iter_mut().zip(grow) {
                                *sv += av * gv;
                            }
                        }
                    }
                }
            }
            Op::AddBias(x, b) => {
                if let Some(s) = self.slot(grads, *x) {
                    s.iter_mut().zip(g).for_each(|(s, g)| *s += g);
                }
                if let Some(s) = self.slot(grads, *b) {
                    let n = s.len();
                    for (k, gv) in g.iter().enumerate() {
                        s[k % n] += gv;
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = axis_extents(node.value.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let alen = self.shape(v)[*axis];
                    if let Some(s) = self.slot(grads, v) {
                        for o in 0..outer {
                            let src = (o * total + offset) * inner;
                            let dst = o * alen * inner;
                            for q in 0..alen * inner {
                                s[dst + q] += g[src + q];
                            }
                        }
                    }
                    offset += alen;
                }
            }
            Op::Slice { input, axis, start } => {
                let (outer, len, inner) = axis_extents(node.value.shape(), *axis);
                let alen = self.shape(*input)[*axis];
                if let Some(s) = self.slot(grads, *input) {
                    for o in 0..outer {
                        let dst = (o * alen + start) * inner;
                        let src = o * len * inner;
                        for q in 0..len * inner {
                            s[dst + q] += g[src + q];
                        }
                    }
                }
            }
            Op::Transpose(x) => {
                let sx = self.shape(*x);
                let (m, n) = (sx[0], sx[1]);
                if let Some(s) = self.slot(grads, *x) {
                    for r in 0..m {
                        for c in 0..n {
                            s[r * n + c] += g[c * m + r];
                        }
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    s.iter_mut().for_each(|s| *s += g[0]);
                }
            }
            Op::MeanAxis { input, axis } => {
                let (outer, alen, inner) = axis_extents(self.shape(*input), *axis);
                if let Some(s) = self.slot(grads, *input) {
                    let denom = alen as f64;
                    for o in 0..outer {
                        for a in 0..alen {
                            for q in 0..inner {
                                s[(o * alen + a) * inner + q] += g[o * inner + q] / denom;
                            }
                        }
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..s.len() {
                        s[k] += g[k] * out[k] * (1.0 - out[k]);
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..s.len() {
                        s[k] += g[k] * (1.0 - out[k] * out[k]);
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..s.len() {
                        if xv[k] > 0.0 {
                            s[k] += g[k];
                        }
                    }
                }
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).data();
                if let Some(s) = self.slot(grads, *x) {
                    for k in 0..s.len() {
                        let v = xv[k];
                        let t = (GELU_C * (v + GELU_A * v * v * v)).tanh();
                        let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                        s[k] += g[k] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
                    }
                }
            }
            Op::Softmax { input, axis } => {
                let (outer, alen, inner) = axis_extents(node.value.shape(), *axis);
                if let Some(s) = self.slot(grads, *input) {
                    for o in 0..outer {
                        for q in 0..inner {
                            let idx = |a: usize| (o * alen + a) * inner + q;
                            let dot: f64 = (0..alen).map(|a| g[idx(a)] * out[idx(a)]).sum();
                            for a in 0..alen {
                                s[idx(a)] += out[idx(a)] * (g[idx(a)] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { input, gamma, beta, xhat, inv_std } => {
                let n = self.shape(*gamma)[0];
                let gv = self.value(*gamma).data();
                if let Some(s) = self.slot(grads, *gamma) {
                    for (k, gk) in g.iter().enumerate() {
                        s[k % n] += gk * xhat[k];
                    }
                }
                if let Some(s) = self.slot(grads, *beta) {
                    for (k, gk) in g.iter().enumerate() {
                        s[k % n] += gk;
                    }
                }
                if let Some(s) = self.slot(grads, *input) {
                    let mut dxhat = vec![0.0; n];
                    for (r, inv) in inv_std.iter().enumerate() {
                        let base = r * n;
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for j in 0..n {
                            let d = g[base + j] * gv[j];
                            dxhat[j] = d;
                            mean_d += d;
                            mean_dx += d * xhat[base + j];
                        }
                        mean_d /= n as f64;
                        mean_dx /= n as f64;
                        for j in 0..n {
                            s[base + j] += inv * (dxhat[j] - mean_d - xhat[base + j] * mean_dx);
                        }
                    }
                }
            }
            Op::Dropout { input, scale } => {
                if let Some(s) = self.slot(grads, *input) {
                    for k in 0..s.len() {
                        s[k] += g[k] * scale[k];
                    }
                }
            }
            Op::Conv1d { input, kernel, dilation } => {
                let (sx, sk) = (self.shape(*input), self.shape(*kernel));
                let (t_len, c_in) = (sx[0], sx[1]);
                let (c_out, k) = (sk[0], sk[2]);
                let xv = self.value(*input).data();
                let kv = self.value(*kernel).data();
                if let Some(s) = self.slot(grads, *input) {
                    for j in 0..k {
                        let shift = (k - 1 - j) * dilation;
                        for t in shift..t_len {
                            let grow = &g[t * c_out..(t + 1) * c_out];
                            let srow = &mut s[(t - shift) * c_in..(t - shift + 1) * c_in];
                            for (o, &go) in grow.iter().enumerate() {
                                let kbase = o * c_in * k + j;
                                for (i, sv) in srow.iter_mut().enumerate() {
                                    *sv += kv[kbase + i * k] * go;
                                }
                            }
                        }
                    }
                }
                if let Some(s) = self.slot(grads, *kernel) {
                    for j in 0..k {
                        let shift = (k - 1 - j) * dilation;
                        for t in shift..t_len {
                            let grow = &g[t * c_out..(t + 1) * c_out];
                            let xrow = &xv[(t - shift) * c_in..(t - shift + 1) * c_in];
                            for (o, &go) in grow.iter().enumerate() {
                                let kbase = o * c_in * k + j;
                                for (i, &xi) in xrow.iter().enumerate() {
                                    s[kbase + i * k] += xi * go;
                                }
                            }
                        }
                    }
                }
            }
            Op::Huber { pred, target, delta } => {
                let (p, t) = (self.value(*pred).data(), self.value(*target).data());
                let scale = g[0] / p.len().max(1) as f64;
                if let Some(s) = self.slot(grads, *pred) {
                    for k in 0..s.len() {
                        s[k] += scale * huber_psi(p[k] - t[k], *delta);
                    }
                }
                if let Some(s) = self.slot(grads, *target) {
                    for k in 0..s.len() {
                        s[k] -= scale * huber_psi(p[k] - t[k], *delta);
                    }
                }
            }
            Op::BceLogits { logits, target } => {
                let (x, y) = (self.value(*logits).data(), self.value(*target).data());
                let scale = g[0] / x.len().max(1) as f64;
                if let Some(s) = self.slot(grads, *logits) {
                    for k in 0..s.len() {
                        s[k] += scale * (sigmoid(x[k]) - y[k]);
                    }
                }
                if let Some(s) = self.slot(grads, *target) {
                    for k in 0..s.len() {
                        s[k] -= scale * x[k];
                    }
                }
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    sigmoid(x)
}
