//! `scdc` command line: generate synthetic corpora, train, evaluate, and
//! export predictions or embeddings, all driven by one JSON experiment
//! config.
//!
//! Exit codes: 0 success, 2 usage/config/data errors, 1 runtime failures.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scdc_core::Error;

#[derive(Parser)]
#[command(name = "scdc", version, about = "Annotation-efficient spectral recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Primary output path (per-subcommand default otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the subcommand-relevant seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus CSV (plus a config sidecar).
    Synth(CommonArgs),
    /// Train per the config's mode; writes a checkpoint and a JSON-lines log.
    Train(CommonArgs),
    /// Evaluate the config's checkpoint on the config's dataset.
    Eval(CommonArgs),
    /// Predict (id, label, confidence) rows for the config's dataset.
    Predict(CommonArgs),
    /// Export (id, z_1..z_E) embedding rows for the config's dataset.
    Embed(CommonArgs),
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Data(_) | Error::Json(_) | Error::Csv(_)
        | Error::Checkpoint(_) => 2,
        Error::Io(_) | Error::Shape(_) => 1,
    }
}

fn main() -> ExitCode {
    let level = std::env::var("SCDC_LOG_LEVEL").unwrap_or_else(|_| "info".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::cmd_synth(&args.config, args.out.as_deref(), args.seed),
        Command::Train(args) => commands::cmd_train(&args.config, args.seed),
        Command::Eval(args) => commands::cmd_eval(&args.config, args.out.as_deref(), args.seed),
        Command::Predict(args) => {
            commands::cmd_predict(&args.config, args.out.as_deref(), args.seed)
        }
        Command::Embed(args) => commands::cmd_embed(&args.config, args.out.as_deref(), args.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
