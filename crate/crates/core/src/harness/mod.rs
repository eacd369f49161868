//! Experiment orchestration: budget and penalty sweeps over seeds, with
//! datasets, weights, histories and diagnostics persisted to disk.

mod experiment;
pub mod io;
mod results;

pub use experiment::{
    dataset_seed, lambda_sweep, run_experiment, test_set, test_set_seed, ExperimentConfig, ExperimentOutput, Method, Timing,
};
pub use io::{load_dataset, load_weights, save_dataset, save_weights, write_report};
pub use results::{mean_std, AggregateRow, ResultsTable, RunRow, RunStatus};
