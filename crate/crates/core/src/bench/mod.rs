//! Experiment harness: configuration, synthetic data and the runners
//! behind the command-line tool.

mod blb_curve;
mod config;
mod dfc_runs;
mod output;
pub mod synthetic;
mod tradeoff;

pub use blb_curve::ground_truth_widths;
pub use config::{BlbSettings, ConfigError, ConvexSettings, DfcSettings, Experiment, ExperimentConfig, McSettings, McSolver};
pub use dfc_runs::{base_config, run_method, Method, MethodRun};
pub use output::{ExperimentOutput, Table, SCHEMA_LINE};
pub use tradeoff::{bodies_for, evaluate_body, BodyReport};

use crate::error::{Error, Result};

/// Columns of every results CSV.
pub const MAIN_HEADER: [&str; 8] = [
    "experiment",
    "procedure",
    "config",
    "step",
    "work_units",
    "metric",
    "value",
    "status",
];

/// Columns of every timing sidecar.
pub const TIMING_HEADER: [&str; 6] = [
    "experiment",
    "procedure",
    "config",
    "step",
    "wallclock_seconds",
    "task_seconds",
];

/// Runs `experiment` on a pool of `cfg.threads` workers.
pub fn run(cfg: &ExperimentConfig, experiment: Experiment) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::numerical(format!("thread pool: {e}")))?;
    pool.install(|| match experiment {
        Experiment::BlbCurve => blb_curve::run(cfg),
        Experiment::DfcAccuracy => dfc_runs::run_accuracy(cfg),
        Experiment::DfcRuntime => dfc_runs::run_runtime(cfg),
        Experiment::TradeoffSparsePca | Experiment::TradeoffCutMatrix => tradeoff::run(cfg, experiment),
    })
}
