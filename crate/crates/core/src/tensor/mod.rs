//! Dense row-major tensors and a tape-based reverse-mode differentiation engine.
//!
//! [`Tensor`] is a plain value type. Differentiable computation happens on a
//! [`Tape`]: leaves are pushed with [`Tape::leaf`] or [`Tape::constant`], every
//! primitive records one node, and [`Tape::backward`] replays the record in
//! reverse to populate gradients.

mod tape;

pub use tape::{logistic, Tape, Var};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape { op: "tensor", lhs: shape, rhs: vec![data.len()] });
        }
        Ok(Tensor { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: Vec::new(), data: vec![value] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    /// Builds a `[rows, cols]` matrix; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape { op: "from_rows", lhs: vec![cols], rhs: vec![r.len()] });
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor { shape: vec![rows.len(), cols], data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape { op: "reshape", lhs: self.shape, rhs: shape });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Rows `start..start + len` of a 2-D tensor.
    pub fn slice_rows(&self, start: usize, len: usize) -> Tensor {
        let c = self.cols();
        Tensor { shape: vec![len, c], data: self.data[start * c..(start + len) * c].to_vec() }
    }

    /// Columns selected by `idx` (in the given order) of a 2-D tensor.
    pub fn select_cols(&self, idx: &[usize]) -> Tensor {
        let rows = self.rows();
        let mut data = Vec::with_capacity(rows * idx.len());
        for r in 0..rows {
            let row = self.row(r);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Tensor { shape: vec![rows, idx.len()], data }
    }

    /// Rounds every element to the nearest `f32`, the checkpoint storage precision.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}

/// Splits `shape` around `axis` into (outer, axis length, inner) extents.
pub(crate) fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
