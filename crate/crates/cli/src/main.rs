//! `msnet`: generate synthetic I/Q data, train, evaluate and export features.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O or file
//! format error, 3 training divergence.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "msnet", version, about = "Modulation classification with a multi-scale CNN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file
    Generate(Overrides),
    /// Train in two stages; writes checkpoints and train_report.csv
    Train(Overrides),
    /// Evaluate a checkpoint on the test split; writes metrics.csv and confusion.csv
    Eval(Overrides),
    /// Export test-split features to features.csv
    Features(Overrides),
    /// Project test-split features onto two principal axes; writes pca.csv
    Pca(Overrides),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use msnet::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Diverged { .. } => 3,
                E::Io(_) | E::Csv(_) | E::BadMagic { .. } | E::UnsupportedVersion { .. } | E::Truncated(_) | E::Malformed(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (o, cmd): (&Overrides, fn(&RunConfig) -> anyhow::Result<()>) = match &cli.command {
        Command::Generate(o) => (o, commands::generate),
        Command::Train(o) => (o, commands::train),
        Command::Eval(o) => (o, commands::eval),
        Command::Features(o) => (o, commands::features),
        Command::Pca(o) => (o, commands::pca),
    };
    cmd(&RunConfig::resolve(o)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
