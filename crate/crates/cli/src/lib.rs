//! Experiment driver: spec files, runs, traces and onboarding.

pub mod commands;
pub mod data;
pub mod report;
pub mod spec;

pub use commands::{cmd_onboard, cmd_run, cmd_trace, write_trace};
pub use spec::{ExperimentSpec, NewCenterSpec, StrategyChoice};
