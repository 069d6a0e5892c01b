//! `softcover`: exponent curves, code simulations and self-checks from the
//! command line.
//!
//! Exit status: 0 ok, 1 invariant or verification failure, 2 config error,
//! 3 budget exceeded.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

pub const THREADS_ENV: &str = "SOFTCOVER_THREADS";

#[derive(Parser)]
#[command(name = "softcover", version, about = "Strong converse exponents of soft covering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// E_c and E_a over the configured rate grid, written as CSV.
    Exponents {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact total variation of random codes at each rate and blocklength.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in numerical self-checks.
    Verify {
        /// Run only this suite.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Rényi mutual information of the configured input over a grid of orders.
    Renyi {
        #[arg(long)]
        config: PathBuf,
        /// Orders as start:stop:step, e.g. 0.5:0.99:0.01.
        #[arg(long)]
        alphas: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Both curves for BSC(0.1) with input [0.48, 0.52], as CSV and SVG.
    Figure1 {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}='{raw}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Exponents { config, out } => commands::exponents(&config, &out),
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::Verify { suite } => commands::verify(suite.as_deref()),
        Command::Renyi { config, alphas, out } => commands::renyi(&config, &alphas, &out),
        Command::Figure1 { out_dir } => commands::figure1(&out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("softcover: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
