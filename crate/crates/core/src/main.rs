use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scalestat::bench::{self, Experiment, ExperimentConfig};
use scalestat::Error;

#[derive(Parser)]
#[command(name = "scalestat", version, about = "Desk-scale experiments for resampling, matrix completion and convex denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error versus wallclock for the bootstrap and BLB.
    BlbCurve(RunArgs),
    /// RMSE of base completion and DFC across revealed fractions.
    DfcAccuracy(RunArgs),
    /// Wallclock of base completion and DFC across dimensions.
    DfcRuntime(RunArgs),
    /// Relaxation table for sparse-PCA signals.
    TradeoffSparsePca(RunArgs),
    /// Relaxation table for cut-matrix signals.
    TradeoffCutMatrix(RunArgs),
    /// Parse and check a configuration without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Numerical(String),
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run(experiment: Experiment, args: RunArgs) -> Result<(), Failure> {
    let mut cfg = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    if let Some(named) = cfg.experiment {
        if named != experiment {
            eprintln!("note: config names `{named}`, running `{experiment}`");
        }
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let output = bench::run(&cfg, experiment).map_err(|e| match e {
        Error::Config(c) => Failure::Config(c.to_string()),
        Error::InvalidArgument(m) => Failure::Config(m),
        other => Failure::Numerical(other.to_string()),
    })?;
    let (main, timing) = output
        .write(&args.out)
        .map_err(|e| Failure::Numerical(format!("writing results: {e}")))?;
    println!("{}", main.display());
    println!("{}", timing.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::BlbCurve(a) => run(Experiment::BlbCurve, a),
        Command::DfcAccuracy(a) => run(Experiment::DfcAccuracy, a),
        Command::DfcRuntime(a) => run(Experiment::DfcRuntime, a),
        Command::TradeoffSparsePca(a) => run(Experiment::TradeoffSparsePca, a),
        Command::TradeoffCutMatrix(a) => run(Experiment::TradeoffCutMatrix, a),
        Command::Validate { config } => load(&config).map(|cfg| print!("{}", cfg.serialize())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical error: {m}");
            ExitCode::from(3)
        }
    }
}
