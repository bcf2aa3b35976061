//! Experiment orchestration, MSE tables, bootstrap evaluation and file I/O.

mod aggregate;
mod bootstrap;
mod config;
mod experiment;
pub mod io;

pub use aggregate::{aggregate_mse, summary_json, write_summary, GroupKey, KeyValue, MseRow};
pub use bootstrap::{bootstrap_evaluate, BootstrapConfig, BootstrapRow, DEFAULT_N_BOOT};
pub use config::{EstimatorChoice, ExperimentConfig, TruthConfig, TruthKind};
pub use experiment::{
    run_experiment, run_seed, seed_configurations, Configuration, ResultRow, SweepMode, THREADS_ENV,
};
