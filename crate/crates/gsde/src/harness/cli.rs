//! Command-line front end.
//!
//! Every subcommand reads one JSON config (see `config`), runs its
//! experiment, prints a summary to stdout, and optionally writes CSV/JSON
//! files. The exit code is the machine-readable verdict:
//!
//! * 0: ran to completion, all checked bounds held
//! * 1: ran to completion, some estimate exceeded its bound
//! * 2: the invocation or config was unusable
//! * 3: the run itself failed (explosion, non-finite state, output I/O)

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::error::Error;
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::{
    bounds_report, convergence_experiment, increment_experiment, moment_experiment,
    paths_experiment, random_grid_pairs,
};
use crate::harness::report::{write_outputs, Report};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Number of on-grid index pairs the `increments` subcommand checks.
/// The pairs are derived from the config seed, so a config pins them.
const INCREMENT_PAIR_COUNT: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "gsde",
    about = "Simulate SDEs under volatility uncertainty and check explicit moment and error bounds",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Print the explicit constants and error bounds for a problem
    Bounds(ConfigArg),
    /// Sample raw driver paths (no scheme) for inspection
    Paths(ConfigArg),
    /// Check scheme second moments against the moment bound
    Moments(ConfigArg),
    /// Check scheme increments against the linear-in-time bound
    Increments(ConfigArg),
    /// Check strong errors along a resolution ladder against the error bound
    Converge(ConfigArg),
}

#[derive(Debug, clap::Args)]
struct ConfigArg {
    /// Path to the JSON experiment config
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

fn classify(e: &Error) -> i32 {
    if e.is_usage() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn finish(report: &dyn Report, config: &ExperimentConfig) -> i32 {
    println!("{}", report.summary());
    if let Err(e) = write_outputs(report, config.out.as_ref()) {
        eprintln!("error: {e}");
        return classify(&e);
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}

fn dispatch(command: &Command) -> i32 {
    let (Command::Bounds(arg)
    | Command::Paths(arg)
    | Command::Moments(arg)
    | Command::Increments(arg)
    | Command::Converge(arg)) = command;
    let config = match ExperimentConfig::from_path(&arg.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return classify(&e);
        }
    };
    let outcome = match command {
        Command::Bounds(_) => config
            .problem()
            .and_then(|p| bounds_report(&p, &config.table_resolutions()))
            .map(|report| finish(&report, &config)),
        Command::Paths(_) => config.run_spec().and_then(|spec| {
            let q = config.single_resolution()?;
            let report = paths_experiment(&spec, q)?;
            Ok(finish(&report, &config))
        }),
        Command::Moments(_) => config.run_spec().and_then(|spec| {
            let q = config.single_resolution()?;
            let report = moment_experiment(&spec, q)?;
            Ok(finish(&report, &config))
        }),
        Command::Increments(_) => config.run_spec().and_then(|spec| {
            let q = config.single_resolution()?;
            let grid = spec.problem.grid(q)?;
            let pairs = random_grid_pairs(&grid, INCREMENT_PAIR_COUNT, spec.seed);
            let report = increment_experiment(&spec, q, &pairs)?;
            Ok(finish(&report, &config))
        }),
        Command::Converge(_) => config.run_spec().and_then(|spec| {
            let (ladder, q_ref) = config.ladder()?;
            let report = convergence_experiment(&spec, &ladder, q_ref)?;
            Ok(finish(&report, &config))
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

/// Parses arguments and runs the selected subcommand, returning the
/// process exit code. Kept free of `std::process::exit` so tests can
/// drive it in-process.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    dispatch(&cli.command)
}

/// Runs only the argument grammar, with nothing printed and nothing
/// executed: the exit code the parse alone would produce. This is the
/// entry point the argument fuzzer drives.
pub fn check_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(_) => EXIT_PASS,
        Err(e) if e.use_stderr() => EXIT_CONFIG,
        Err(_) => EXIT_PASS,
    }
}
