mod commands;
mod config;
mod snapfile;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch runner for sparse-recovery STAP experiments.
#[derive(Debug, Parser)]
#[command(name = "srstap", version, about)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Input snapshot file (spectrum / rangescan).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output path (CSV, or the snapshot file for `simulate`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Override the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate clutter snapshots and write them to a snapshot file.
    Simulate,
    /// Estimate angle-Doppler spectra from a snapshot file and emit CSV.
    Spectrum,
    /// Monte Carlo IF_Loss versus snapshot count, with convergence rates.
    Convergence,
    /// IF_Loss versus an assumed-parameter mismatch at fixed snapshot count.
    Sweep,
    /// Sliding-window adaptive range scan over a snapshot file.
    Rangescan,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }

    let run = || -> Result<(), commands::CliError> {
        let cfg = config::load(cli.config.as_deref(), cli.seed)?;
        match cli.command {
            Command::Simulate => commands::simulate(&cfg, cli.output.as_deref()),
            Command::Spectrum => {
                commands::spectrum(&cfg, cli.input.as_deref(), cli.output.as_deref())
            }
            Command::Convergence => commands::convergence(&cfg, cli.output.as_deref()),
            Command::Sweep => commands::sweep(&cfg, cli.output.as_deref()),
            Command::Rangescan => {
                commands::rangescan(&cfg, cli.input.as_deref(), cli.output.as_deref())
            }
        }
    };

    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
