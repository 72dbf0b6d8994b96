//! Experiment harness: config parsing, the experiments themselves,
//! report rendering, and the CLI that ties them together.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;

pub use cli::{check_args, run_cli, EXIT_CONFIG, EXIT_PASS, EXIT_RUNTIME, EXIT_VIOLATION};
pub use config::ExperimentConfig;
pub use experiments::{
    bounds_report, convergence_experiment, increment_experiment, moment_experiment,
    paths_experiment, random_grid_pairs, slope_fit, RunSpec,
};
pub use report::{format_float, Report};
