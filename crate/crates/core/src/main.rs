use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedadp::cli::{self, Report, RunOptions};
use fedadp::Error;

#[derive(Parser)]
#[command(name = "fedadp", version, about = "Federated learning simulator: FedAvg vs adaptive FedAdp weighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and seed; write per-round CSVs and summary.json.
    Run(CommonArgs),
    /// Run FedAvg and FedAdp side by side; write compare.csv and reduction.csv.
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Affects speed only, never results.
    #[arg(long)]
    threads: Option<usize>,
}

impl From<CommonArgs> for RunOptions {
    fn from(a: CommonArgs) -> Self {
        RunOptions {
            config_path: a.config,
            out: a.out,
            threads: a.threads,
        }
    }
}

fn print_report(report: &Report) {
    for (strategy, targets) in &report.summary {
        for (target, s) in targets {
            println!(
                "{strategy:>6}  target {target}: {}",
                cli::rounds_cell(s.median_rounds, s.best_accuracy)
            );
        }
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match args.command {
        Command::Run(a) => cli::run(&a.into()),
        Command::Compare(a) => cli::compare(&a.into()),
    };
    match result {
        Ok(report) => {
            print_report(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InfeasiblePartition { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
