use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use distlab_cli::commands::{
    cmd_baseline, cmd_diagnose, cmd_distort, cmd_run, BaselineArgs, DiagnoseArgs, DistortArgs,
    RunArgs,
};

/// Distortion-robustness laboratory: synthesize image distortions, train
/// small CNNs under no-train / fine-tune / retrain regimes, and report
/// error rates and feature-map diagnostics as CSV.
#[derive(Parser)]
#[command(name = "distlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the clean baseline model and save its checkpoint.
    Baseline(BaselineArgs),
    /// Write distorted copies of a dataset to disk.
    Distort(DistortArgs),
    /// Execute an experiment plan and emit results.csv.
    Run(RunArgs),
    /// Sweep the feature-map gradient-variance diagnostic and emit a report.
    Diagnose(DiagnoseArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return;
        }
        Err(e) => {
            // First line of clap's message, reshaped into the error contract.
            let line = e.to_string();
            let line = line.lines().next().unwrap_or("bad arguments");
            eprintln!("error[config]: {}", line.trim_start_matches("error: "));
            std::process::exit(1);
        }
    };
    let result = match &cli.command {
        Command::Baseline(args) => cmd_baseline(args),
        Command::Distort(args) => cmd_distort(args),
        Command::Run(args) => cmd_run(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
