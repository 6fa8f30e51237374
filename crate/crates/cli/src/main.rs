//! `homog`: batch front-end for the homogenization experiments.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Writer;

#[derive(Parser)]
#[command(name = "homog", version, about = "Periodic and defect homogenization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cell correctors and homogenized coefficients.
    Cell(Common),
    /// One oscillating Dirichlet problem.
    Solve(Common),
    /// Convergence-rate sweep over eps.
    Rates(Common),
    /// Corrector of a periodic medium with a localized defect.
    Defect(Common),
    /// Mean value over growing squares.
    Meanvalue(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the planned work and exit without computing.
    #[arg(long)]
    dry_run: bool,
    /// Worker threads for independent jobs.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, fn(&mut Context) -> Result<(), CliError>) = match &cli.command {
        Command::Cell(c) => (c, commands::cell),
        Command::Solve(c) => (c, commands::solve),
        Command::Rates(c) => (c, commands::rates),
        Command::Defect(c) => (c, commands::defect),
        Command::Meanvalue(c) => (c, commands::meanvalue),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", common.config.display())))?;
    let config = RunConfig::parse(&text)?;
    let dir = common
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let digest = config.digest();
    let mut ctx = Context {
        config,
        writer: Writer::new(dir, digest),
        dry_run: common.dry_run,
    };
    cmd(&mut ctx)?;
    if !ctx.dry_run {
        for path in ctx.writer.finish()? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code())
        }
    }
}
