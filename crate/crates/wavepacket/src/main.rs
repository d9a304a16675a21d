//! Command-line entry point.
//!
//! ```text
//! wavepacket simulate <config>   run a config and write its outputs
//! wavepacket verify <config>     run the residual/spectral verification suite
//! wavepacket print-defaults      print the default config document
//! ```
//!
//! The `WAVEPACKET_OUT_DIR` environment variable, when set, overrides the
//! config's `out_dir`. Exit codes: 0 success, 2 rejected config, 3 failed run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavepacket::cli::{self, RunMode};
use wavepacket::SimError;

#[derive(Parser)]
#[command(
    name = "wavepacket",
    version,
    about = "Gaussian wave-packet simulator under continuous position measurement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its outputs
    Simulate { config: PathBuf },
    /// Run the verification suite (PDE residuals, spectral cross-check) for a config
    Verify { config: PathBuf },
    /// Print the default config document to stdout
    PrintDefaults,
}

fn run(command: Command) -> Result<(), SimError> {
    let (path, mode) = match command {
        Command::Simulate { config } => (config, RunMode::Simulate),
        Command::Verify { config } => (config, RunMode::Verify),
        Command::PrintDefaults => {
            print!("{}", cli::default_config_text());
            return Ok(());
        }
    };
    let text = std::fs::read_to_string(&path)?;
    let config = cli::parse_config(&text)?;
    let out_dir = std::env::var("WAVEPACKET_OUT_DIR").ok();
    let written = cli::execute(&config, mode, out_dir.as_deref())?;
    for file in written {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
