//! Experiment runner: configuration, verification suites, report files and
//! parameter sweeps.

pub mod config;
pub mod runner;
pub mod suites;

pub use config::{ExperimentConfig, Suite, SystemRef, Tolerances};
pub use runner::{run, sweep, systems_table, RunResult, SweepResult};
pub use suites::SuiteOutcome;
