//! Forward forecasting (FFM) and backward reconstruction (BRM) models.
//!
//! Both directions share one backbone:
//!
//! ```text
//! input [R_in, D] -> TCN [R_in, C] -> GRU [R_in, H_gru] -> Transformer [R_in, H_gru]
//!                 -> mean pool [H_gru] -> dropout -> heads ([R_out, D_cont], [R_out, D_disc])
//! ```
//!
//! The forward model reads the past `W` rows and emits the next `H`; the
//! backward model reads the next `H` rows and emits the past `W`.

mod cost;
mod loss;
mod model;
mod spec;

pub use cost::{estimate_cost, CostReport, CostTerm};
pub use loss::hybrid_loss;
pub use model::{brm_forward, ffm_forward, ForwardTrace, Model, Prediction, Predictor};
pub use spec::{Direction, ModelSpec};
