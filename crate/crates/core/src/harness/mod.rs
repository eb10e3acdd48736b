//! Experiment orchestration: configuration, runs, sweeps and reports.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigBuilder, ExperimentConfig, OutputFormat, OutputSpec};
pub use experiment::{
    initial_state, parse_values, run_experiment, run_sweep, simulate, validate_truncation, SweepAxis, SweepSpec,
    TruncationCheck,
};
pub use report::{emit_report, plot_script, PlotKind, Report, RunMetrics};
