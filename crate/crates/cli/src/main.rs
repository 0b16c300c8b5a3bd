//! Command-line driver for the DI-QSDC simulator.
//!
//! Exit status: 0 on a completed run, 2 when the protocol aborted at a
//! security check (an expected outcome, reported in the JSON), 64 on
//! usage or configuration errors, 1 on I/O failures.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

use commands::CommandStatus;
use config::{BlockFile, BlockSection, ChannelName, ProtocolFile, SweepFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }
}

#[derive(Parser)]
#[command(
    name = "diqsdc",
    version,
    about = "Simulator and analytics for device-independent quantum secure direct communication over non-Markovian channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form parameter sweep written as a CSV file
    Sweep(SweepArgs),
    /// One seeded Monte Carlo run of the five-stage protocol
    Protocol(ProtocolArgs),
    /// Block-codec demo: per-block Bob/Eve spectra plus the decoded message
    BlockDemo(BlockDemoArgs),
    /// Emit the six figure-data CSVs at the pinned parameters
    Figures(FiguresArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep specification (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; a manifest is written alongside
    #[arg(long)]
    out: PathBuf,
    /// Override the ratio list (repeatable)
    #[arg(long = "ratio")]
    ratios: Vec<f64>,
    /// Override the channel kind
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Protocol configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (outcome.json, rounds.csv, manifest.json)
    #[arg(long)]
    out: PathBuf,
    /// Override the seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the channel kind
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
}

#[derive(Args)]
struct BlockDemoArgs {
    /// Optional configuration (TOML); the default encodes "0110" over
    /// ideal pairs
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FiguresArgs {
    /// Output directory for fig3a..fig5b CSVs
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Ad,
    Dephasing,
}

impl From<ChannelArg> for ChannelName {
    fn from(value: ChannelArg) -> Self {
        match value {
            ChannelArg::Ad => ChannelName::Ad,
            ChannelArg::Dephasing => ChannelName::Dephasing,
        }
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<CommandStatus, CliError> {
    match cli.command {
        Command::Sweep(args) => {
            let mut spec = read_toml::<SweepFile>(&args.config)?.sweep;
            if !args.ratios.is_empty() {
                spec.ratios = args.ratios;
            }
            if let Some(channel) = args.channel {
                spec.channel = channel.into();
            }
            commands::cmd_sweep(&spec, &args.out)
        }
        Command::Protocol(args) => {
            let mut section = read_toml::<ProtocolFile>(&args.config)?.protocol;
            if let Some(seed) = args.seed {
                section.seed = seed;
            }
            if let Some(channel) = args.channel {
                section.channel.kind = channel.into();
            }
            commands::cmd_protocol(&section, &args.out)
        }
        Command::BlockDemo(args) => {
            let mut section = match &args.config {
                Some(path) => read_toml::<BlockFile>(path)?.block,
                None => BlockSection::default(),
            };
            if let Some(seed) = args.seed {
                section.seed = seed;
            }
            commands::cmd_block_demo(&section, &args.out)
        }
        Command::Figures(args) => commands::cmd_figures(&args.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match dispatch(cli) {
        Ok(CommandStatus::Completed) => ExitCode::SUCCESS,
        Ok(CommandStatus::ProtocolAborted) => ExitCode::from(2),
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(64)
        }
        Err(CliError::Io(err)) => {
            eprintln!("i/o error: {err}");
            ExitCode::FAILURE
        }
    }
}
