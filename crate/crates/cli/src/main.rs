//! `noisecrn`: run one experiment described by a JSON config and write its
//! CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 failed
//! certification or experiment.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};
use config::Config;

#[derive(Parser)]
#[command(name = "noisecrn", version, about = "Experiments on a noise-stabilized two-species reaction network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate one trajectory of the X, Y or Z chain.
    Simulate,
    /// Certify the drift and interface-ordering inequalities on a radius window.
    Verify,
    /// Integrate the deterministic flow and detect blow-up.
    Ode,
    /// Compare the rescaled Y chain with its Ornstein-Uhlenbeck limit.
    Scaling,
    /// Couple the Y and Z chains and measure their distance.
    Couple,
    /// Hitting times of the Ornstein-Uhlenbeck limit.
    Ou,
    /// Scan a long X run for excursions and test their arrivals.
    Excursions,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let mut config = Config::load(cli.config.as_deref()).map_err(Failure::Usage)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.unwrap_or_else(|| commands::default_out().to_path_buf());
    let mut ctx = Context::new(config, out)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    let command = cli.command;
    pool.install(|| match command {
        Command::Simulate => commands::simulate(&mut ctx),
        Command::Verify => commands::verify(&mut ctx),
        Command::Ode => commands::ode(&mut ctx),
        Command::Scaling => commands::scaling(&mut ctx),
        Command::Couple => commands::couple(&mut ctx),
        Command::Ou => commands::ou(&mut ctx),
        Command::Excursions => commands::excursions(&mut ctx),
    })?;
    Ok(ctx.written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(paths) => {
            println!("{}", commands::written(&paths));
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Experiment(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
