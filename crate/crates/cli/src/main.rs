//! `cabpl`: simulations and tooling for CRC-aided BP list decoding.

mod commands;
mod opts;

use std::process::ExitCode;

use cabpl::Error;
use clap::{Parser, Subcommand};

use opts::Opts;

#[derive(Parser)]
#[command(name = "cabpl", version, about = "CRC-aided belief propagation list decoding of polar codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BLER/BER sweep of one decoder, written as CSV
    Simulate(Opts),
    /// Paired sweep of several decoders plus SNR gaps at a target BLER
    Compare(Opts),
    /// Collect frames on which BP with the default graph fails
    CollectFailures(Opts),
    /// Decode a failure dataset with every permutation of a pool
    EvalPerms(Opts),
    /// Genetic selection of a permutation set from a failure dataset
    SelectPerms(Opts),
    /// Encode one payload
    Encode(Opts),
    /// Decode one frame and show per-member details
    DecodeOne(Opts),
}

fn run(cli: Cli) -> cabpl::Result<()> {
    match cli.command {
        Command::Simulate(o) => commands::simulate(&o.resolve()?),
        Command::Compare(o) => commands::compare(&o.resolve()?),
        Command::CollectFailures(o) => commands::collect(&o.resolve()?),
        Command::EvalPerms(o) => commands::eval_perms(&o.resolve()?),
        Command::SelectPerms(o) => commands::select_perms(&o.resolve()?),
        Command::Encode(o) => commands::encode(&o.resolve()?),
        Command::DecodeOne(o) => commands::decode_one(&o.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parse(_) | Error::InvalidDimension(_) => 2,
                Error::Capability(_) => 3,
                _ => 1,
            })
        }
    }
}
