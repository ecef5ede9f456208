use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod decompose;
mod grid;
mod manifest;
mod plot;
mod simulate;

#[derive(Parser, Debug)]
#[command(name = "vabench", version, about = "Benchmark verbal-autopsy cause assignment across sites")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Master seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic multi-site data from a JSON config.
    Simulate(simulate::SimulateArgs),
    /// Run the train/test grid and write a results CSV.
    Grid(grid::GridArgs),
    /// Variance decomposition (and Friedman tests) of grid results.
    Decompose(decompose::DecomposeArgs),
    /// Render SVG figures from results CSVs and decomposition reports.
    Plot(plot::PlotArgs),
}

/// An error tagged with the pipeline stage it came from.
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

pub type StageResult<T> = Result<T, StageError>;

pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(&cli.global, &args),
        Command::Grid(args) => grid::run(&cli.global, &args),
        Command::Decompose(args) => decompose::run(&cli.global, &args),
        Command::Plot(args) => plot::run(&cli.global, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vabench: {} failed: {:#}", e.stage, e.source);
            ExitCode::FAILURE
        }
    }
}
