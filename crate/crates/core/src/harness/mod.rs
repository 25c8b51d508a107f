//! Experiment sweeps, grid export and timing.

pub mod config;
pub mod export;
pub mod sweep;
pub mod timing;

pub use config::{ExperimentConfig, ExportSpec, GridSpec, Task, WeightChoice};
pub use export::{export_eigenfunction_grid, sign_agreement, Table};
pub use sweep::{run_experiment, run_experiment_with, thread_pool, ResultRecord, StreamItem, Summary, SummaryEntry};
pub use timing::{log_log_slope, time_scaling_report, TimingRow};
