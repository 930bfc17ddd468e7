//! Command-line surface for the admission risk toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/configuration error,
//! 3 internal error.

mod commands;
mod errors;
mod score_log;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};


#[derive(Parser)]
#[command(name = "admrisk", version, about = "One-year mortality risk toolkit")]
struct Cli {
    /// Suppress console tables and progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV plus its ground-truth sidecar.
    Synth(commands::synth::SynthArgs),
    /// Fit a model pipeline and persist it as a versioned bundle.
    Train(commands::train::TrainArgs),
    /// Run the repeated stratified-holdout evaluation for one or more models.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Score admitted patients from a CSV, appending to a prediction log.
    Score(commands::score::ScoreArgs),
    /// Print the per-feature importance table of a trained bundle.
    Importance(commands::importance::ImportanceArgs),
    /// Fit one of the clinical baseline models (buurman, profund).
    BaselineFit(commands::train::BaselineFitArgs),
}

fn main() {
    // die quietly when a downstream pipe closes (e.g. `admrisk ... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not failures
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };

    let quiet = cli.quiet;
    let outcome = match cli.command {
        Command::Synth(args) => commands::synth::run(args, quiet),
        Command::Train(args) => commands::train::run(args, quiet),
        Command::Evaluate(args) => commands::evaluate::run(args, quiet),
        Command::Score(args) => commands::score::run(args, quiet),
        Command::Importance(args) => commands::importance::run(args, quiet),
        Command::BaselineFit(args) => commands::train::run_baseline(args, quiet),
    };

    if let Err(error) = outcome {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
