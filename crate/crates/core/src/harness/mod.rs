//! Experiment plumbing: configuration, the multi-seed runner, CSV outputs
//! and summary statistics.

pub mod config;
pub mod output;
pub mod runner;
pub mod stats;

pub use config::{ConfigError, EnvName, ExperimentConfig};
pub use output::{read_curves, read_trials, write_all, CurveRow, OutputError, TrialRecord};
pub use runner::{run_experiment, run_trial, RunError, Trial};
pub use stats::{mean_sd, summarize, time_to_threshold, welch_t_test, AlgoSummary, StatsError, Welch};
