//! Command-line pipeline driver. Exit codes: 0 success, 2 validation
//! error, 3 data error, 4 numerical failure.

mod commands;
mod config;
mod io;

use clap::{Parser, Subcommand};

use config::{CommonArgs, RunConfig};

#[derive(Parser)]
#[command(
    name = "geodemand",
    version,
    about = "Spatial demand pipeline: trip ingestion, disadvantage index, transit access, Durbin models, impact scenarios",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean raw trips into per-area demand and origin-destination flows.
    Ingest(CommonArgs),
    /// Fit the social disadvantage index from the ACS item table.
    Sdi(CommonArgs),
    /// Compute hex-based transit access time per area.
    Tat(CommonArgs),
    /// Run diagnostics, fit both demand models, and compute impacts.
    Fit(CommonArgs),
    /// Evaluate ride-change scenarios against fitted impacts.
    Scenario(CommonArgs),
    /// Aggregate all stage outputs into a markdown report.
    Report(CommonArgs),
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let (args, runner): (&CommonArgs, fn(&RunConfig) -> anyhow::Result<()>) = match &cli.command {
        Command::Ingest(a) => (a, commands::ingest::run),
        Command::Sdi(a) => (a, commands::sdi::run),
        Command::Tat(a) => (a, commands::tat::run),
        Command::Fit(a) => (a, commands::fit::run),
        Command::Scenario(a) => (a, commands::scenario::run),
        Command::Report(a) => (a, commands::report::run),
    };
    let cfg = RunConfig::load(args)?;
    runner(&cfg)
}

/// Walk the error chain for the most specific classification.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<geodemand_core::Error>() {
            return core.class().exit_code();
        }
        if cause.downcast_ref::<io::Stale>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 2;
        }
    }
    2
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code(&e));
        }
    }
}
