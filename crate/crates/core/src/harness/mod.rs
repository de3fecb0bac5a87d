//! Experiment harness: dataset generation, the verification experiments,
//! the gradient-descent baseline, and report emission.

pub mod config;
pub mod experiments;
pub mod gd;
pub mod generate;
pub mod gradcheck;
pub mod report;

pub use config::{ExperimentConfig, Tolerances};
pub use experiments::{
    check_constructed_point, pattern_cost_closed, run_gd_baseline, run_global_min,
    run_grad_check, run_local_min_enum, sample_mu,
};
pub use gd::{gd_baseline, GdConfig, GdRun};
pub use generate::{generate_dataset, sample_in_ball};
pub use gradcheck::{grad_check, CriticalityCheck, FD_STEP};
pub use report::{emit_report, Assertion, ExperimentReport, GeometrySummary, RunReport, Table};
