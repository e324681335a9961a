//! Experiment harness: configuration, datasets, runs, traces and the
//! sensitivity probe behind the `dp-ocp` command.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod probe;

pub use config::{Algo, ExperimentConfig, KeyValues, LossKind, SetSpec, SyntheticSpec};
pub use data::{gen_synthetic, Dataset};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_trial, ExperimentResult, Summary, TraceRow};
pub use probe::sensitivity_probe;
