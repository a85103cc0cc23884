//! `pwiener`: runs capacity, profile, cascade, solver and end-to-end
//! experiments from a TOML configuration.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numeric
//! failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser)]
#[command(
    name = "pwiener",
    version,
    about = "Wiener-type boundary regularity experiments for the parabolic p-Laplacian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative capacities delta(rho) at the configured radii.
    Capacity(Common),
    /// Capacity profile on geometric radii and the Wiener sums.
    DeltaProfile(Common),
    /// Subsequence selection and oscillation cascade on a synthetic profile.
    Cascade(Common),
    /// Solve the parabolic problem and write snapshots.
    Solve(Common),
    /// Full pipeline: profile, cascade, solve, oscillations, regression.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, value_name = "K", default_value_t = 0)]
    workers: usize,
    /// Seed for synthetic profiles; overrides `seed` in the configuration.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Capacity(c) => ("capacity", c),
        Command::DeltaProfile(c) => ("delta-profile", c),
        Command::Cascade(c) => ("cascade", c),
        Command::Solve(c) => ("solve", c),
        Command::Verify(c) => ("verify", c),
    };
    if common.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", common.workers)))?;
    }
    let loaded = config::load(&common.config)?;
    let out_dir = common.out.clone().or_else(|| loaded.cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let seed = common.seed.unwrap_or(loaded.cfg.seed);
    let mut ctx = Context { loaded: &loaded, seed, out: OutDir::create(&out_dir)? };
    let res = match cli.command {
        Command::Capacity(_) => commands::capacity(&mut ctx),
        Command::DeltaProfile(_) => commands::delta_profile(&mut ctx),
        Command::Cascade(_) => commands::cascade(&mut ctx),
        Command::Solve(_) => commands::solve(&mut ctx),
        Command::Verify(_) => commands::verify(&mut ctx),
    };
    for path in ctx.out.written() {
        eprintln!("wrote {}", path.display());
    }
    if res.is_err() && !ctx.out.written().is_empty() {
        eprintln!("{name}: partial outputs kept in {}", out_dir.display());
    }
    res
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
