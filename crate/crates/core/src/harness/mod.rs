//! Experiment configuration, multi-seed runs and run comparison.

pub mod compare;
pub mod config;
pub mod eval;
pub mod experiment;

pub use compare::{compare_runs, Comparison};
pub use config::ExperimentConfig;
pub use eval::{evaluate, EvalSummary};
pub use experiment::{run_experiment, RunSummary};
