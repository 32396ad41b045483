//! `stabcert`: numerical certification of the relativistic stability chain.
//!
//! Subcommands evaluate the constant chain, search for better cutoff and
//! chain parameters, run the lattice verification battery, or reproduce the
//! published reference chain. Every run writes a JSON report that is
//! byte-stable for a fixed configuration and seed, timestamp aside.

mod config;
mod report;
mod run;

use clap::{Parser, Subcommand};

use config::Mode;

/// Failures that end a run before any verdict is reached; they exit with
/// code 2. Codes 0, 1, and 3 come out of completed runs.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
}

impl From<stabcert_core::lattice::LatticeError> for CliError {
    fn from(e: stabcert_core::lattice::LatticeError) -> Self {
        CliError::Config(format!("lattice: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "stabcert",
    version,
    about = "Certification toolkit for the relativistic stability constant chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the constant chain and report the stability margin.
    Chain {
        /// JSON configuration file; omitted fields keep their defaults.
        #[arg(long)]
        config: Option<String>,
        /// Override one field by dotted path, e.g. --set chain.alpha=0.01.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Report path stem (extension added per format).
        #[arg(long)]
        output: Option<String>,
    },
    /// Search cutoff and chain parameters for a larger critical coupling.
    Optimize {
        #[arg(long)]
        config: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Run the lattice verification battery.
    Verify {
        #[arg(long)]
        config: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        output: Option<String>,
        /// Which battery to run; overrides the configured suite.
        #[arg(long, value_enum)]
        suite: Option<config::Suite>,
    },
    /// Evaluate the published reference chain with its pinned inputs.
    ReproducePaper {
        #[arg(long)]
        output: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let config = match cli.command {
        Command::Chain { config, set, output } => {
            config::resolve(config.as_deref(), &set, Mode::Chain, output.as_deref())?
        }
        Command::Optimize { config, set, output } => {
            config::resolve(config.as_deref(), &set, Mode::Optimize, output.as_deref())?
        }
        Command::Verify { config, set, output, suite } => {
            let mut resolved =
                config::resolve(config.as_deref(), &set, Mode::Verify, output.as_deref())?;
            if let Some(suite) = suite {
                resolved.suite = suite;
            }
            resolved
        }
        Command::ReproducePaper { output } => config::reproduce_paper_config(output.as_deref())?,
    };
    run::execute(config)
}
