//! Command-line front end: configuration, training orchestration, metrics,
//! checkpoints, ablation sweeps and charts.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod metrics;
pub mod plot;

pub use checkpoint::Checkpoint;
pub use commands::{
    expand_grid, run_ablate, run_eval, run_stats, run_train, study_preset, train_seed, AblationCell, Axis, SeedReport,
};
pub use config::{config_reference, load_config, PastSelf, TrainConfig};
pub use metrics::{read_metrics, AggregateRow, MetricsRow};
pub use plot::run_plot;

#[cfg(test)]
mod tests;
