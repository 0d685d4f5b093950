//! Run configuration, checkpoint files and the commands behind the `prescient` binary.

mod checkpoint;
mod commands;
mod config;

pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use commands::{
    cmd_cost, cmd_eval, cmd_plotdata, cmd_score, cmd_stream, cmd_synth, cmd_train, read_scores, write_scores,
    ScoreOutcome, ScoreRow, StreamStats, SynthRequest, TrainOutcome, CHECKPOINT_FILE, CONFIG_FILE, LOSS_LOG_FILE,
    METRICS_FILE, PLOT_FILE, SCORES_FILE,
};
pub use config::{DataConfig, DataPaths, ModelConfig, RunConfig, RunSection, ScoreConfig, Strategy, OUT_ENV};
