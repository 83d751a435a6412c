//! Batch front-end for the fractional-damping identification library:
//! synthetic-data generation with optional noise, Laplace transforms,
//! the three reconstruction methods, pole data, and a sanity suite.

mod commands;
mod config;
mod io;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, RunContext};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fracwave", version, about = "Fractionally damped wave equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for all artifacts; defaults to the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the noise seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Generate the input data in memory from the configured model instead
    /// of reading the trace artifact (reconstruct/transform only).
    #[arg(long)]
    analytic_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and write the time-trace CSV.
    Simulate(CommonArgs),
    /// Laplace-transform a trace onto the configured abscissa grid.
    Transform(CommonArgs),
    /// Run the configured identification method and write the report.
    Reconstruct(CommonArgs),
    /// Print the dominant pole pair and residues of the transfer function.
    Poles(CommonArgs),
    /// Run the sanity suite on the configured model.
    Verify(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Transform(a)
            | Command::Reconstruct(a)
            | Command::Poles(a)
            | Command::Verify(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let a = cli.command.common();
    let ctx = RunContext::load(&a.config, a.out.clone(), a.seed, a.analytic_data)?;
    match &cli.command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Transform(_) => commands::transform(&ctx),
        Command::Reconstruct(_) => commands::reconstruct(&ctx),
        Command::Poles(_) => commands::poles(&ctx),
        Command::Verify(_) => commands::verify(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("FRACWAVE_LOG", "error"),
    )
    .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
