//! Dataset ingestion, feature schemas, normalization, sliding windows and
//! synthetic anomaly generation.

mod csv_io;
mod manifest;
mod schema;
mod series;
mod synth;
mod windows;

pub use csv_io::{load_csv, load_labels, write_csv, write_labels, LoadOptions};
pub use manifest::{DatasetEntry, Manifest};
pub use schema::{denormalize, infer_schema, normalize, FeatureSchema};
pub use series::TimeSeries;
pub use synth::{synth_generate, synth_pair, SynthKind, SynthOptions, Synthesized};
pub use windows::{make_windows, Window, WindowSet};
