use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `T x D` observations on implicit timestamps `0..T`, with optional 0/1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Tensor,
    labels: Option<Vec<u8>>,
    imputed: usize,
}

impl TimeSeries {
    /// Validates shape and labels, then replaces missing values by carrying
    /// the previous observation forward (zero before the first one).
    pub fn new(values: Tensor, labels: Option<Vec<u8>>) -> Result<Self> {
        if values.ndim() != 2 {
            return Err(Error::data(format!("series must be 2-D, got shape {:?}", values.shape())));
        }
        if let Some(l) = &labels {
            if l.len() != values.rows() {
                return Err(Error::data(format!(
                    "label length {} does not match series length {}",
                    l.len(),
                    values.rows()
                )));
            }
            if let Some(bad) = l.iter().find(|&&v| v > 1) {
                return Err(Error::data(format!("label {bad} is not 0 or 1")));
            }
        }
        let mut values = values;
        let imputed = impute(&mut values);
        Ok(TimeSeries { values, labels, imputed })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Number of missing cells filled during construction.
    pub fn imputed(&self) -> usize {
        self.imputed
    }

    pub fn anomaly_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().map(|&v| v as usize).sum())
    }

    pub fn anomaly_ratio(&self) -> Option<f64> {
        let n = self.len();
        self.anomaly_count().map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
    }

    pub fn with_labels(self, labels: Option<Vec<u8>>) -> Result<Self> {
        let imputed = self.imputed;
        let mut s = TimeSeries::new(self.values, labels)?;
        s.imputed = imputed;
        Ok(s)
    }

    pub fn with_values(&self, values: Tensor) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::Shape {
                op: "with_values",
                lhs: values.shape().to_vec(),
                rhs: self.values.shape().to_vec(),
            });
        }
        TimeSeries::new(values, self.labels.clone())
    }

    /// Rows `start..start + len`, labels included.
    pub fn slice(&self, start: usize, len: usize) -> TimeSeries {
        TimeSeries {
            values: self.values.slice_rows(start, len),
            labels: self.labels.as_ref().map(|l| l[start..start + len].to_vec()),
            imputed: 0,
        }
    }
}

fn impute(values: &mut Tensor) -> usize {
    let cols = values.cols();
    let data = values.data_mut();
    let mut count = 0;
    for c in 0..cols {
        let mut last = 0.0;
        for r in 0..data.len() / cols.max(1) {
            let v = &mut data[r * cols + c];
            if v.is_finite() {
                last = *v;
            } else {
                *v = last;
                count += 1;
            }
        }
    }
    count
}
