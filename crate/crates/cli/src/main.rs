//! Command line for the diffuseness / uncertainty-decoding pipeline.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use udfront_core::Error;

#[derive(Parser)]
#[command(
    name = "udfront",
    version,
    about = "Multichannel scene simulation, spatial diffuseness features and uncertainty decoding"
)]
struct Cli {
    /// Worker threads for utterance-level parallelism (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a multichannel scene with known ground truth.
    Simulate(commands::simulate::Args),
    /// Extract assembled features and diffuseness variances from a WAV.
    Extract(commands::extract::Args),
    /// Train a desk-scale MLP on labeled feature files.
    Train(commands::train::Args),
    /// Decode features into per-frame state posteriors.
    Decode(commands::decode::Args),
    /// Compare decode modes by frame accuracy.
    Eval(commands::eval::Args),
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Wav(_) => 10,
        Error::Format(_) => 11,
        Error::Dimension(_) => 12,
        Error::InvalidInput(_) => 13,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs > 0 {
            // ignore failure if a pool exists already (tests call main code paths)
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global();
        }
    }
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Extract(args) => commands::extract::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Decode(args) => commands::decode::run(args),
        Command::Eval(args) => commands::eval::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
