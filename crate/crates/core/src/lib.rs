//! Proactive multivariate time-series anomaly detection.
//!
//! Two hybrid TCN -> GRU -> Transformer models share one backbone:
//! the forward forecasting model predicts the next `H` rows from the last `W`,
//! the backward reconstruction model rebuilds the last `W` rows from the next
//! `H`. Their prediction errors become anomaly scores.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod detectors;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod params;
pub mod scoring;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
