//! `phyloswarm` command-line front-end.

mod report_cmd;
mod run;
mod setup;
mod worker;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// How a command failed; each class maps to its own exit status.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration (exit 2).
    Config(anyhow::Error),
    /// Unreadable or malformed evaluator input such as alignments,
    /// partitions, cache files or words (exit 3).
    Input(anyhow::Error),
    /// Anything else (exit 1).
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Input(_) => 3,
            Failure::Run(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Input(e) | Failure::Run(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

#[derive(Parser)]
#[command(name = "phyloswarm", version, about = "Gene subset selection with binary PSO and a GA baseline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method over every swarm and repetition.
    Run(RunArgs),
    /// Rebuild the result tables from ledgers and summaries.
    Report(report_cmd::ReportArgs),
    /// Score single words.
    Evaluate(EvaluateArgs),
    /// Serve evaluations to a master over TCP.
    ServeWorker(worker::ServeArgs),
}

/// Configuration sources shared by the commands that build an evaluator.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set engine.L=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Base seed for the engine and the GA.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_parser = ["bpso1", "bpso2", "ga"])]
    pub method: Option<String>,
    /// Particles per swarm.
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub swarms: Option<usize>,
    /// Repetitions per swarm.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_parser = ["local", "tcp"])]
    pub transport: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Evaluation workers per run.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (overrides `report.output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Print the tree behind each word in Newick format.
    #[arg(long)]
    pub newick: bool,
    /// Words to score, e.g. `1101111011`.
    #[arg(required = true)]
    pub words: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run::run(&a),
        Command::Report(a) => report_cmd::report(&a),
        Command::Evaluate(a) => run::evaluate(&a),
        Command::ServeWorker(a) => worker::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
