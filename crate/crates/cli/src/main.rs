mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Event-frame autoencoder toolkit: build event datasets, train and
/// evaluate models, probe layer information, pick thresholds, benchmark.
///
/// Every subcommand also takes `--config FILE` with `key = value` lines whose
/// keys are that subcommand's long flag names. Flags override the file.
///
/// Exit codes: 0 success, 1 usage error, 2 data or validation error.
/// EVLAB_DETERMINISTIC=1 turns off internal parallelism.
#[derive(Debug, Parser)]
#[command(name = "evlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Plain-text `key = value` option file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn intensity-frame sequences into event frames plus a manifest.
    Events(commands::EventsArgs),
    /// Train the autoencoder on a manifest's frames.
    TrainAe(commands::TrainAeArgs),
    /// Train a classifier head on top of a frozen trained encoder.
    TrainClf(commands::TrainClfArgs),
    /// Score weights on a manifest (metrics + ROC, or reconstruction accuracy).
    Eval(commands::EvalArgs),
    /// Layer-wise mutual information report.
    Probe(commands::ProbeArgs),
    /// Sweep candidate thresholds over raw sequences and pick one.
    Select(commands::SelectArgs),
    /// Single-image throughput and latency.
    Bench(commands::BenchArgs),
    /// Total and trainable parameter counts of a weight file.
    Params(commands::ParamsArgs),
    /// Write a synthetic labeled intensity-frame corpus.
    Synth(commands::SynthArgs),
}

fn main() -> ExitCode {
    let cmd = Cli::command();
    let args = match config::expand(&cmd, std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Events(a) => commands::events(a),
        Command::TrainAe(a) => commands::train_ae(a),
        Command::TrainClf(a) => commands::train_clf(a),
        Command::Eval(a) => commands::eval(a),
        Command::Probe(a) => commands::probe(a),
        Command::Select(a) => commands::select(a),
        Command::Bench(a) => commands::bench(a),
        Command::Params(a) => commands::params(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
