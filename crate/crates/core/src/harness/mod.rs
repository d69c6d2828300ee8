//! Experiment harness: presets, configuration, case studies, output files
//! and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;

pub use config::{ControllerMode, ExperimentConfig};
pub use experiments::{
    compare_gains, run_case_study_1, run_case_study_2, run_experiment, Case2Mode, Case2Result, RunOptions, RunRecord,
};
