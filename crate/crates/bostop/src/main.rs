use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bostop::cli::{self, DiagnoseArgs, RunArgs, ScoreArgs};

#[derive(Parser)]
#[command(
    name = "bostop",
    about = "Bayesian optimization with automatic, regret-bound-based termination",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config across criteria and seeds.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for record files and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seeds, e.g. `--seeds 1,2,3`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Override the config's iteration budget.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Override the config's criteria; repeatable. Format
        /// `NAME:key=val,...`, e.g. `regret_fixed:threshold=0.01`.
        #[arg(long = "criterion")]
        criteria: Option<Vec<String>>,
    },
    /// Compute RYC/RTC scores and aggregates from a records directory.
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Full-budget horizon T (defaults to each record's length).
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Emit bound-quality diagnostics from synthetic-run records.
    Diagnose {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, seeds, max_iters, criteria } => {
            cli::cmd_run(&RunArgs { config, out, seeds, max_iters, criteria })
        }
        Command::Score { records, out, budget } => {
            cli::cmd_score(&ScoreArgs { records, out, budget })
        }
        Command::Diagnose { records, out } => cli::cmd_diagnose(&DiagnoseArgs { records, out }),
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
