use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::series::TimeSeries;

/// Partition of the columns into continuous and binary features, plus the
/// z-score statistics of each continuous column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub n_features: usize,
    pub continuous: Vec<usize>,
    pub discrete: Vec<usize>,
    /// Parallel to `continuous`.
    pub mean: Vec<f64>,
    /// Parallel to `continuous`; never zero.
    pub std: Vec<f64>,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n_features];
        for &c in self.continuous.iter().chain(&self.discrete) {
            if c >= self.n_features || std::mem::replace(&mut seen[c], true) {
                return Err(Error::config("schema columns must partition 0..D"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("schema columns must partition 0..D"));
        }
        if self.mean.len() != self.continuous.len() || self.std.len() != self.continuous.len() {
            return Err(Error::config("schema needs statistics for every continuous column"));
        }
        if self.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::config("schema standard deviations must be positive"));
        }
        Ok(())
    }

    fn check(&self, series: &TimeSeries) -> Result<()> {
        if series.n_features() != self.n_features {
            return Err(Error::data(format!(
                "schema expects {} features, series has {}",
                self.n_features,
                series.n_features()
            )));
        }
        Ok(())
    }
}

/// A column is discrete when its train values are all 0 or 1 and it takes
/// at most `max_distinct` distinct values; every other column is continuous.
pub fn infer_schema(train: &TimeSeries, max_distinct: usize) -> FeatureSchema {
    let d = train.n_features();
    let n = train.len();
    let x = train.values();
    let (mut continuous, mut discrete, mut mean, mut std) = (vec![], vec![], vec![], vec![]);
    for c in 0..d {
        let col = (0..n).map(|r| x.get(r, c));
        let (mut zero, mut one, mut other) = (false, false, false);
        for v in col.clone() {
            match v {
                0.0 => zero = true,
                1.0 => one = true,
                _ => other = true,
            }
        }
        if !other && (zero as usize + one as usize) <= max_distinct {
            discrete.push(c);
            continue;
        }
        let m = col.clone().sum::<f64>() / n as f64;
        let var = col.map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        continuous.push(c);
        mean.push(m);
        std.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
    }
    FeatureSchema { n_features: d, continuous, discrete, mean, std }
}

fn map_continuous(series: &TimeSeries, schema: &FeatureSchema, f: impl Fn(f64, f64, f64) -> f64) -> Result<TimeSeries> {
    schema.check(series)?;
    let mut values: Tensor = series.values().clone();
    let d = schema.n_features;
    let data = values.data_mut();
    for r in 0..series.len() {
        for (j, &c) in schema.continuous.iter().enumerate() {
            let v = &mut data[r * d + c];
            *v = f(*v, schema.mean[j], schema.std[j]);
        }
    }
    series.with_values(values)
}

/// Z-scores continuous columns with the schema statistics; discrete columns pass through.
pub fn normalize(series: &TimeSeries, schema: &FeatureSchema) -> Result<TimeSeries> {
    map_continuous(series, schema, |v, m, s| (v - m) / s)
}

pub fn denormalize(series: &TimeSeries, schema: &FeatureSchema) -> Result<TimeSeries> {
    map_continuous(series, schema, |v, m, s| v * s + m)
}
