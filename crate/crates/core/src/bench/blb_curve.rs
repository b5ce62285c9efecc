//! Error-versus-time curves for the bootstrap and BLB on logistic regression.

use std::time::Instant;

use rayon::prelude::*;

use super::output::{num, ExperimentOutput, Table};
use super::synthetic::logistic_dataset;
use super::{Experiment, ExperimentConfig, MAIN_HEADER, TIMING_HEADER};
use crate::error::Result;
use crate::estimators::{fit, percentile_interval, relative_width_error, EstimatorSpec, QualityFunctional};
use crate::resampling::{average_assessments, blb_subsample, bootstrap_resample, BlbConfig};
use crate::rng::RngStream;
use crate::data::WeightedSample;

/// Percentile widths of the estimator over `replicates` fresh datasets.
pub fn ground_truth_widths(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Vec<f64>> {
    let b = &cfg.blb;
    let spec = EstimatorSpec::logistic(b.d);
    let estimates = (0..b.truth_replicates)
        .into_par_iter()
        .map(|i| {
            let data = logistic_dataset(b.n, b.d, b.coefficient, &rng.derive(i as u64))?;
            fit(&spec, &data, &WeightedSample::uniform(b.n))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(percentile_interval(&estimates, b.alpha)?.widths())
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let exp = Experiment::BlbCurve.name();
    let b = &cfg.blb;
    let root = RngStream::from_seed(cfg.seed);
    let spec = EstimatorSpec::logistic(b.d);
    let mut results = Table::new(&MAIN_HEADER);
    let mut timing = Table::new(&TIMING_HEADER);

    let start = Instant::now();
    let truth = ground_truth_widths(cfg, &root.derive(1))?;
    let truth_secs = start.elapsed().as_secs_f64();
    let truth_config = format!("replicates={};n={};d={}", b.truth_replicates, b.n, b.d);
    for (k, w) in truth.iter().enumerate() {
        results.push(vec![
            exp.into(),
            "truth".into(),
            truth_config.clone(),
            k.to_string(),
            (b.truth_replicates * b.n).to_string(),
            "ci_width".into(),
            num(*w),
            "ok".into(),
        ]);
    }
    timing.push(vec![
        exp.into(),
        "truth".into(),
        truth_config,
        "0".into(),
        num(truth_secs),
        num(truth_secs),
    ]);

    let data = logistic_dataset(b.n, b.d, b.coefficient, &root.derive(0))?;

    // Bootstrap: resamples one after another, error after each.
    let boot_rng = root.derive(2);
    let boot_config = format!("B={};alpha={}", b.bootstrap_b, b.alpha);
    let mut estimates = Vec::with_capacity(b.bootstrap_b);
    let mut elapsed = 0.0;
    for i in 0..b.bootstrap_b {
        let t = Instant::now();
        let fitted = bootstrap_resample(&data, &spec, i, &boot_rng);
        elapsed += t.elapsed().as_secs_f64();
        let step = i + 1;
        let (value, status) = match fitted {
            Ok(e) => {
                estimates.push(e);
                if estimates.len() < 2 {
                    continue;
                }
                let widths = percentile_interval(&estimates, b.alpha)?.widths();
                (num(relative_width_error(&widths, &truth)?), "ok".to_string())
            }
            Err(e) => (String::new(), format!("error: {e}")),
        };
        results.push(vec![
            exp.into(),
            "bootstrap".into(),
            boot_config.clone(),
            step.to_string(),
            (step * b.n).to_string(),
            "relative_ci_error".into(),
            value,
            status,
        ]);
        timing.push(vec![
            exp.into(),
            "bootstrap".into(),
            boot_config.clone(),
            step.to_string(),
            num(elapsed),
            num(elapsed),
        ]);
    }

    // BLB: subsamples in parallel; the curve adds them in index order and
    // charges the latest completion time among those included.
    let mut blb_cfg = BlbConfig::new(b.gamma, b.s, b.r);
    blb_cfg.weighting = b.weighting;
    blb_cfg.functional = QualityFunctional::CiWidth { alpha: b.alpha };
    let m = blb_cfg.validate(b.n)?;
    let blb_rng = root.derive(3);
    let blb_config = format!("m={m};s={};r={};weighting={};alpha={}", b.s, b.r, b.weighting.name(), b.alpha);
    let t0 = Instant::now();
    let outcomes = (0..b.s)
        .into_par_iter()
        .map(|j| {
            let began = t0.elapsed().as_secs_f64();
            let out = blb_subsample(&data, &spec, &blb_cfg, j, &blb_rng)?;
            let done = t0.elapsed().as_secs_f64();
            Ok((out, done, done - began))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut finished = 0.0f64;
    let mut task = 0.0;
    let mut work = 0u64;
    for j in 0..outcomes.len() {
        let (ref out, done, secs) = outcomes[j];
        finished = finished.max(done);
        task += secs;
        work += out.work_units;
        let included: Vec<_> = outcomes[..=j].iter().map(|o| o.0.clone()).collect();
        let (value, status) = match average_assessments(&included) {
            Ok(widths) => (num(relative_width_error(&widths, &truth)?), "ok".to_string()),
            Err(e) => (String::new(), format!("error: {e}")),
        };
        let status = if out.values.is_none() { format!("dropped-subsample; {status}") } else { status };
        results.push(vec![
            exp.into(),
            "blb".into(),
            blb_config.clone(),
            (j + 1).to_string(),
            work.to_string(),
            "relative_ci_error".into(),
            value,
            status,
        ]);
        timing.push(vec![
            exp.into(),
            "blb".into(),
            blb_config.clone(),
            (j + 1).to_string(),
            num(finished),
            num(task),
        ]);
    }

    Ok(ExperimentOutput {
        experiment: Experiment::BlbCurve,
        results,
        timing,
    })
}
