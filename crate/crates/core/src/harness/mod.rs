//! Pipeline entry points behind the command-line tool: grounding fits,
//! paired A/B experiments, log replay and live sessions.

pub mod compare;
pub mod config;
pub mod grounding;
pub mod replay;
pub mod serve;
pub mod stats;

pub use compare::{run_compare, run_trial, CompareRun, MetricsTable, TrialRow};
pub use config::{ExperimentSpec, HarnessConfig, ModelSection};
pub use grounding::{grounding_run, Grounding};
pub use replay::{replay, ReplayReport};
pub use stats::{mean_std, sign_test, SignTest};
