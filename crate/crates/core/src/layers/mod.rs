//! Neural building blocks of the hybrid encoder: a causal dilated TCN, a GRU,
//! a Transformer encoder, mean pooling and the dual linear output heads.

mod gru;
mod heads;
mod tcn;
mod transformer;

pub use gru::{Gru, GruConfig};
pub use heads::{mean_pool, DualHeads, HeadOutput, Linear};
pub use tcn::{Tcn, TcnConfig};
pub use transformer::{sinusoidal_encoding, EncoderTrace, PositionalEncoding, TransformerConfig, TransformerEncoder};
