mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Common;
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "sdcs", version, about = "Sample-distortion tools for compressive imaging")]
struct Cli {
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Named prior (sd-curve, simulate) or band model (allocate, image).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// State-evolution curve, lower bounds and convex envelope of a prior.
    SdCurve,
    /// Split a measurement budget across wavelet bands.
    Allocate,
    /// Monte Carlo sample distortion against its theoretical value.
    Simulate,
    /// Compressively sample and reconstruct a PGM image.
    Image {
        /// Input PGM; overrides the config's `input`.
        input: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot set up {n} threads: {e}")))?;
    }
    let out = OutDir::create(&cli.out)?;
    let common = Common { preset: cli.preset.as_deref(), seed: cli.seed, out: &out };
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::SdCurve => commands::sd_curve(config::load(cfg)?, &common),
        Command::Allocate => commands::allocate(config::load(cfg)?, &common),
        Command::Simulate => commands::simulate(config::load(cfg)?, &common),
        Command::Image { input } => commands::image(config::load(cfg)?, input, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
