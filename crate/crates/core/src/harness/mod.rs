//! Experiment orchestration: configs, the training loop with early
//! stopping, per-seed metrics files, multi-seed summaries and gradient rank
//! tracking.

mod config;
pub mod metrics;
mod pretrain;
pub mod presets;
mod rank;
mod run;

pub use config::{ExperimentConfig, Method, Mode, OptimizerConfig, Schedule, FULL_DATA_BATCH};
pub use metrics::{aggregate, mean_std, MetricsRow, RunMeta, RunStatus, SummaryRow};
pub use pretrain::{pretrain, pretrain_config, save_pretrained, sidecar_path, PretrainMeta};
pub use rank::track_rank;
pub use run::{
    run_experiment, run_experiment_with, run_seed, write_summary, ExperimentData, ExperimentOutcome,
    Observer, SeedRun, StepEvent,
};
