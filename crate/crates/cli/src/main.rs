//! `gelab`: run exchange scenarios, ingest market data, estimate the
//! effects of the tax and sink, and bundle the results.
//!
//! Exit codes: 0 success, 2 configuration error, 3 analysis error,
//! 4 ingest or I/O error.

mod analyze;
mod bundle;
mod error;
mod ingest;
mod items;
mod montecarlo;
mod report;
mod simulate;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "gelab", version, about = "Virtual-economy exchange laboratory")]
pub struct Cli {
    /// Output directory for the bundle.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed of a scenario config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppresses progress and summary output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Prints errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a scenario and write its panel, logs and manifest.
    Simulate(simulate::SimulateArgs),
    /// Run one estimator on a panel (or GP price series).
    #[command(subcommand)]
    Analyze(analyze::Design),
    /// Fetch or load external data into the canonical panel format.
    #[command(subcommand)]
    Ingest(ingest::IngestCommand),
    /// Replicate a scenario and summarise interval coverage.
    Montecarlo(montecarlo::MonteCarloArgs),
    /// Write an HTML index of the artifacts in `--out`.
    Report,
}

pub struct Ctx {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Ctx {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json_errors = cli.json_errors;
    let ctx = Ctx {
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(&ctx, &args),
        Command::Analyze(design) => analyze::run(&ctx, &design),
        Command::Ingest(cmd) => ingest::run(&ctx, &cmd),
        Command::Montecarlo(args) => montecarlo::run(&ctx, &args),
        Command::Report => report::run(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.emit(json_errors);
            ExitCode::from(e.exit_code())
        }
    }
}
