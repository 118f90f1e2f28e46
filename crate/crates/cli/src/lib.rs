//! Scenario loading and experiment orchestration for the `squint` binary.

pub mod experiment;
pub mod scenario;

pub use experiment::{describe_plan, run_experiment, Experiment, RunOptions, RunReport};
pub use scenario::{Resolved, Scenario};
