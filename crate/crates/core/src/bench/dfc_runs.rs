//! Accuracy and runtime of base completion against DFC-Proj.

use std::time::Instant;

use super::output::{num, ExperimentOutput, Table};
use super::synthetic::{low_rank_instance, LowRankInstance};
use super::{Experiment, ExperimentConfig, McSolver, MAIN_HEADER, TIMING_HEADER};
use crate::dfc::{dfc_proj, DfcConfig};
use crate::error::Result;
use crate::matcomp::{complete, CompletionConfig, LowRankEstimate};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Base,
    DfcProj,
    DfcEnsemble,
    /// DFC with a single block; must match `Base` exactly.
    DfcT1,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::DfcProj => "dfc-proj",
            Method::DfcEnsemble => "dfc-ensemble",
            Method::DfcT1 => "dfc-t1",
        }
    }
}

pub struct MethodRun {
    pub estimate: LowRankEstimate,
    pub rmse: f64,
    pub wallclock: f64,
    /// Summed time of the parallel block completions (equals `wallclock` for base).
    pub task_seconds: f64,
}

/// Completion settings for an instance. The penalty uses the usual scale of
/// the spectral norm of the observed noise.
pub fn base_config(cfg: &ExperimentConfig, inst: &LowRankInstance, seed: u64) -> CompletionConfig {
    let mc = &cfg.mc;
    let mut c = match mc.solver {
        McSolver::Constrained => CompletionConfig::constrained(inst.delta),
        McSolver::Penalized => {
            let (m, n) = inst.truth.shape();
            let fraction = inst.observed.len() as f64 / (m * n) as f64;
            let lambda = mc.lambda_scale * mc.noise * fraction.sqrt() * ((m as f64).sqrt() + (n as f64).sqrt());
            CompletionConfig::penalized(lambda)
        }
    };
    c.max_iters = mc.max_iters;
    c.tol = mc.tol;
    c.rank_cap = mc.cap_at_rank.then_some(mc.rank);
    c.seed = seed;
    c
}

/// Runs one method on one instance; the timer covers the solver only.
pub fn run_method(cfg: &ExperimentConfig, inst: &LowRankInstance, method: Method, seed: u64) -> Result<MethodRun> {
    let base = base_config(cfg, inst, seed);
    let start = Instant::now();
    let (estimate, task_seconds) = match method {
        Method::Base => {
            let out = complete(&inst.observed, &base)?;
            (out.estimate, start.elapsed().as_secs_f64())
        }
        _ => {
            let t = if method == Method::DfcT1 { 1 } else { cfg.dfc.t };
            let mut d = DfcConfig::new(t, base);
            d.ensemble = method == Method::DfcEnsemble;
            d.parallelism = cfg.threads;
            d.seed = seed;
            let out = dfc_proj(&inst.observed, &d)?;
            (out.estimate, out.diagnostics.iter().map(|b| b.wallclock).sum::<f64>() + out.combine_wallclock)
        }
    };
    let wallclock = start.elapsed().as_secs_f64();
    let (m, n) = inst.truth.shape();
    let rmse = (&estimate.to_dense()? - &inst.truth).norm() / ((m * n) as f64).sqrt();
    Ok(MethodRun {
        estimate,
        rmse,
        wallclock,
        task_seconds,
    })
}

fn record(
    results: &mut Table,
    timing: &mut Table,
    exp: Experiment,
    method: Method,
    config: &str,
    step: usize,
    work: usize,
    delta: f64,
    run: Result<MethodRun>,
) {
    let e = exp.name().to_string();
    let (rows, secs) = match run {
        Ok(r) => {
            let mut rows = vec![
                ("rmse", num(r.rmse), "ok".to_string()),
                ("rank", r.estimate.rank().to_string(), "ok".to_string()),
            ];
            // c_e in ||L - L0||_F <= c_e sqrt(mn) delta; the sqrt(mn) cancels against the rmse
            if delta > 0.0 {
                rows.push(("error_constant", num(r.rmse / delta), "ok".to_string()));
            }
            (rows, Some((r.wallclock, r.task_seconds)))
        }
        Err(err) => (vec![("rmse", String::new(), format!("error: {err}"))], None),
    };
    for (metric, value, status) in rows {
        results.push(vec![
            e.clone(),
            method.name().into(),
            config.into(),
            step.to_string(),
            work.to_string(),
            metric.into(),
            value,
            status,
        ]);
    }
    if let Some((wall, task)) = secs {
        timing.push(vec![e, method.name().into(), config.into(), step.to_string(), num(wall), num(task)]);
    }
}

pub(super) fn run_accuracy(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let exp = Experiment::DfcAccuracy;
    let root = RngStream::from_seed(cfg.seed);
    let mc = &cfg.mc;
    let mut results = Table::new(&MAIN_HEADER);
    let mut timing = Table::new(&TIMING_HEADER);
    for (step, &pct) in mc.revealed.iter().enumerate() {
        let stream = root.derive(step as u64);
        let inst = low_rank_instance(mc.dim, mc.dim, mc.rank, pct / 100.0, mc.noise, &stream)?;
        let config = format!(
            "m={0};n={0};rank={1};revealed={pct};noise={2};t={3};solver={4}",
            mc.dim, mc.rank, mc.noise, cfg.dfc.t, mc.solver.name()
        );
        let seed = stream.derive(3).stream_id();
        for method in [Method::Base, Method::DfcProj, Method::DfcEnsemble, Method::DfcT1] {
            let run = run_method(cfg, &inst, method, seed);
            record(&mut results, &mut timing, exp, method, &config, step, inst.observed.len(), inst.delta, run);
        }
    }
    Ok(ExperimentOutput {
        experiment: exp,
        results,
        timing,
    })
}

pub(super) fn run_runtime(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let exp = Experiment::DfcRuntime;
    let root = RngStream::from_seed(cfg.seed);
    let mc = &cfg.mc;
    let mut results = Table::new(&MAIN_HEADER);
    let mut timing = Table::new(&TIMING_HEADER);
    for (step, &dim) in mc.dims.iter().enumerate() {
        let stream = root.derive(step as u64);
        let inst = low_rank_instance(dim, dim, mc.rank, mc.runtime_revealed / 100.0, mc.noise, &stream)?;
        let config = format!(
            "m={dim};n={dim};rank={};revealed={};noise={};t={};solver={}",
            mc.rank, mc.runtime_revealed, mc.noise, cfg.dfc.t, mc.solver.name()
        );
        let seed = stream.derive(3).stream_id();
        for method in [Method::Base, Method::DfcProj] {
            let run = run_method(cfg, &inst, method, seed);
            record(&mut results, &mut timing, exp, method, &config, step, inst.observed.len(), inst.delta, run);
        }
    }
    Ok(ExperimentOutput {
        experiment: exp,
        results,
        timing,
    })
}
