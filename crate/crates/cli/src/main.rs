mod charts;
mod error;
mod extract;
mod input;
mod output;
mod scores;
mod simulate;
mod svg;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spfa", version, about = "Score predictor factor analysis, Minres factor analysis and PCA")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract factors/components from a correlation matrix or raw data.
    Extract(extract::ExtractArgs),
    /// Run one of the simulation studies.
    Simulate(simulate::SimulateArgs),
    /// Compute predictor scores for raw data from a stored solution.
    Scores(scores::ScoresArgs),
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    let result: Result<(), CliError> = match cli.command {
        Command::Extract(args) => extract::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Scores(args) => scores::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.kind() as i32);
    }
}
