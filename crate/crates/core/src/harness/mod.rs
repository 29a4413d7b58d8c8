//! Experiment harness: revaluation tasks, seeded trials, parallel suites,
//! configuration and tabular output.

pub mod config;
pub mod output;
pub mod suite;
pub mod task;
pub mod trial;

pub use config::Config;
pub use output::{emit_results, Emit, Format, Table};
pub use suite::{
    correlation_study, min_budget_for, pass_rate_at_budget, replay_behavior_correlation, run_suite,
    trial_seed, CellResult, Correlation, ResultMatrix,
};
pub use task::{build_task, rest_schedule, ScheduleParams, Task, TaskKind, TestSpec};
pub use trial::{run_trial, TrialConfig, TrialRecord};
