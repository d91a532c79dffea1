//! `sabr-lab`: smile, greeks, calibration and Monte Carlo experiments from
//! the command line.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{BetaSweepArgs, CalibrateArgs, ConfigArgs, GreeksArgs, VolArgs};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sabr-lab",
    version,
    about = "SABR normal-vol smile analytics and hedging experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Implied normal vol and the smile internals at one strike.
    Vol(VolArgs),
    /// Price and SABR greeks of one option.
    Greeks(GreeksArgs),
    /// Fit sigma, alpha and rho to a quotes file at fixed beta.
    Calibrate(CalibrateArgs),
    /// Calibrate at several betas and tabulate classic and Bartlett deltas.
    BetaSweep(BetaSweepArgs),
    /// Delta-hedging backtest described by a JSON config.
    Hedge(ConfigArgs),
    /// Vol/forward increment regression described by a JSON config.
    Regress(ConfigArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SABR_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("SABR_LAB_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure {n} worker threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Vol(args) => commands::vol(&args),
        Command::Greeks(args) => commands::greeks(&args),
        Command::Calibrate(args) => commands::calibrate(&args),
        Command::BetaSweep(args) => commands::beta_sweep(&args),
        Command::Hedge(args) => commands::hedge(&args),
        Command::Regress(args) => commands::regress(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
