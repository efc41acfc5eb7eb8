//! `ergocov` command-line tool.
//!
//! Exit status: 0 on success, 2 when a plan ran but did not meet its
//! constraint tolerances (outputs are still written), 1 when inputs could not
//! be read or validated.

mod commands;
mod config;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] ergocov::Error),
    #[error("cannot write outputs: {0}")]
    Output(String),
}

#[derive(Debug, Parser)]
#[command(name = "ergocov", version, about = "Ergodic coverage trajectory planner")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. More than one enables parallel kernel evaluation and
    /// concurrent benchmark cells.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a coverage trajectory and write it with a report and manifest.
    Plan,
    /// Run the scale sweep from the `[bench]` section.
    Bench,
    /// Print the coverage of a trajectory over a sample set as JSON.
    Eval {
        /// Trajectory JSON from `plan`, or CSV with x_1..x_d columns.
        trajectory: PathBuf,
        /// Sample file (csv, obj, ply).
        domain: PathBuf,
        /// Covering radius in meters.
        #[arg(long, allow_negative_numbers = true)]
        radius: f64,
    },
    /// Turn a plan report into CSV files for plotting.
    ExportPlotdata {
        report: PathBuf,
    },
}

pub enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    // usage errors share exit code 1 with other input errors; 2 means not converged
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
