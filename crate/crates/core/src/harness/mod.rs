//! Training, evaluation and head-to-head runs, plus their CSV and chart
//! outputs.

mod chart;
mod compare;
mod config;
mod metrics;
mod train;

pub use chart::{render_chart, render_panels};
pub use compare::{censored_median, compare, ComparisonReport, SeedComparison};
pub use config::RunConfig;
pub use metrics::{
    read_metrics, write_metrics, CsvTable, DuelResult, DuelRow, EpisodeRow, MetricsLog,
    DUEL_COLUMNS, TRAINING_COLUMNS,
};
pub use train::{
    derive_seed, duel, episodes_to_solve, evaluate, run_training, Checkpoint, EarlyStop,
    Evaluation, TrainingOutcome,
};

use std::path::Path;

use crate::error::{Error, Result};

/// Writes `metrics.csv`, `checkpoint.bin` (+ sidecar), the resolved
/// `config.txt`, and `training.svg` into `dir`.
pub fn write_run_outputs(outcome: &TrainingOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("metrics.csv");
    write_metrics(&outcome.log, &csv)?;
    outcome.checkpoint.save(&dir.join("checkpoint.bin"))?;
    outcome.checkpoint.config.save(&dir.join("config.txt"))?;
    let panels = [
        vec!["train_reward".to_string()],
        vec!["test_reward".to_string()],
        vec!["mean_peace".to_string()],
    ];
    render_panels(&csv, &panels, &dir.join("training.svg"))
}
