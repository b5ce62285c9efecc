//! Resampling procedures for assessing estimator quality: the bootstrap,
//! subsampling / m-out-of-n bootstrap, and the bag of little bootstraps.
//!
//! Every fit derives its own [`RngStream`] from `(seed, subsample, resample)`
//! and results are reduced in index order, so output does not depend on how
//! rayon schedules the work.

use std::time::Instant;

use rayon::prelude::*;

use crate::data::{Dataset, WeightedSample};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorSpec, QualityFunctional};
use crate::rng::RngStream;
use crate::sampling::{counts_from_draws, multinomial_weights, poisson_weights, subsample_indices};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    Poisson,
    Multinomial,
}

impl Weighting {
    pub fn draw(&self, m: usize, nominal: usize, rng: &RngStream) -> Result<Vec<f64>> {
        match self {
            Weighting::Poisson => poisson_weights(m, nominal, rng),
            Weighting::Multinomial => multinomial_weights(m, nominal, rng),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Weighting::Poisson => "poisson",
            Weighting::Multinomial => "multinomial",
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Weighting::Poisson),
            "multinomial" => Ok(Weighting::Multinomial),
            other => Err(Error::invalid(format!("unknown weighting '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubsampleSize {
    /// `m = ceil(n^gamma)`.
    Gamma(f64),
    Explicit(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlbConfig {
    pub size: SubsampleSize,
    pub s: usize,
    pub r: usize,
    pub weighting: Weighting,
    pub functional: QualityFunctional,
}

impl BlbConfig {
    pub fn new(gamma: f64, s: usize, r: usize) -> Self {
        BlbConfig {
            size: SubsampleSize::Gamma(gamma),
            s,
            r,
            weighting: Weighting::Poisson,
            functional: QualityFunctional::CiWidth { alpha: 0.05 },
        }
    }

    pub fn subsample_size(&self, n: usize) -> Result<usize> {
        let m = match self.size {
            SubsampleSize::Gamma(g) => {
                if !(g > 0.0 && g <= 1.0) {
                    return Err(Error::invalid(format!("gamma {g} not in (0, 1]")));
                }
                (n as f64).powf(g).ceil() as usize
            }
            SubsampleSize::Explicit(m) => m,
        };
        if m == 0 || m > n {
            return Err(Error::invalid(format!("subsample size {m} out of range for n = {n}")));
        }
        Ok(m)
    }

    pub fn validate(&self, n: usize) -> Result<usize> {
        if self.s < 1 {
            return Err(Error::invalid("BLB needs s >= 1 subsamples"));
        }
        if self.r < 2 {
            return Err(Error::invalid("BLB needs r >= 2 resamples per subsample"));
        }
        self.subsample_size(n)
    }

    fn describe(&self, m: usize) -> String {
        format!(
            "m={m};s={};r={};weighting={};xi={}",
            self.s,
            self.r,
            self.weighting.name(),
            self.functional.name()
        )
    }
}

/// A single failed fit, kept for reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct FitFailure {
    pub subsample: Option<usize>,
    pub resample: usize,
    pub message: String,
}

/// A quality assessment together with its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityEstimate {
    /// Per-coordinate assessment: interval widths, or standard deviations
    /// when the functional is [`QualityFunctional::StdDev`].
    pub values: Vec<f64>,
    pub functional: QualityFunctional,
    pub procedure: &'static str,
    pub config: String,
    /// Sum over attempted fits of the number of rows in the weighted sample.
    pub work_units: u64,
    pub wallclock: f64,
    pub failures: Vec<FitFailure>,
}

#[derive(Clone, Debug)]
pub struct ResampleOutput {
    pub quality: QualityEstimate,
    pub estimates: Vec<Vec<f64>>,
}

/// Fits resample `b` of the ordinary bootstrap: multinomial weights of
/// total `n` over all rows.
pub fn bootstrap_resample(
    data: &Dataset,
    spec: &EstimatorSpec,
    b: usize,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let n = data.n();
    let weights = multinomial_weights(n, n, &rng.derive(b as u64))?;
    let sample = WeightedSample {
        indices: (0..n).collect(),
        weights,
        nominal: n,
    };
    fit(spec, data, &sample).map_err(|e| Error::Resample {
        id: b,
        source: Box::new(e),
    })
}

pub fn bootstrap(
    data: &Dataset,
    spec: &EstimatorSpec,
    resamples: usize,
    functional: QualityFunctional,
    rng: &RngStream,
) -> Result<ResampleOutput> {
    if resamples < 2 {
        return Err(Error::invalid("bootstrap needs B >= 2"));
    }
    let start = Instant::now();
    let estimates = (0..resamples)
        .into_par_iter()
        .map(|b| bootstrap_resample(data, spec, b, rng))
        .collect::<Result<Vec<_>>>()?;
    let values = functional.assess(&estimates)?;
    Ok(ResampleOutput {
        quality: QualityEstimate {
            values,
            functional,
            procedure: "bootstrap",
            config: format!("B={resamples};xi={}", functional.name()),
            work_units: (resamples * data.n()) as u64,
            wallclock: start.elapsed().as_secs_f64(),
            failures: Vec::new(),
        },
        estimates,
    })
}

/// Subsampling (`with_replacement = false`) or the m-out-of-n bootstrap
/// (`true`), with interval widths rescaled by `sqrt(m / n)`.
pub fn m_out_of_n(
    data: &Dataset,
    spec: &EstimatorSpec,
    m: usize,
    resamples: usize,
    with_replacement: bool,
    functional: QualityFunctional,
    rng: &RngStream,
) -> Result<ResampleOutput> {
    let n = data.n();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("m = {m} out of range for n = {n}")));
    }
    if resamples < 2 {
        return Err(Error::invalid("m-out-of-n needs B >= 2"));
    }
    let start = Instant::now();
    let fitted = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let stream = rng.derive(b as u64);
            let sample = if with_replacement {
                let draws = subsample_indices(n, m, true, &stream)?;
                let (indices, weights) = counts_from_draws(&draws);
                WeightedSample {
                    indices,
                    weights,
                    nominal: m,
                }
            } else {
                WeightedSample::unit(subsample_indices(n, m, false, &stream)?)?
            };
            let est = fit(spec, data, &sample).map_err(|e| Error::Resample {
                id: b,
                source: Box::new(e),
            })?;
            Ok((est, sample.len() as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let work_units = fitted.iter().map(|(_, w)| w).sum();
    let estimates: Vec<Vec<f64>> = fitted.into_iter().map(|(e, _)| e).collect();
    let scale = (m as f64 / n as f64).sqrt();
    let values = functional.assess(&estimates)?.into_iter().map(|v| v * scale).collect();
    Ok(ResampleOutput {
        quality: QualityEstimate {
            values,
            functional,
            procedure: if with_replacement { "m-out-of-n" } else { "subsampling" },
            config: format!("m={m};B={resamples};xi={}", functional.name()),
            work_units,
            wallclock: start.elapsed().as_secs_f64(),
            failures: Vec::new(),
        },
        estimates,
    })
}

/// Result of the inner bootstrap on one BLB subsample.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampleOutcome {
    pub index: usize,
    pub rows: Vec<usize>,
    /// Estimates of the resamples that fitted, in resample order.
    pub estimates: Vec<Vec<f64>>,
    /// The quality assessment, or `None` when the subsample was dropped.
    pub values: Option<Vec<f64>>,
    pub failures: Vec<FitFailure>,
    pub work_units: u64,
}

/// Runs the inner bootstrap for subsample `j`: `r` weight vectors of nominal
/// size `n` over `m` rows drawn without replacement.
pub fn blb_subsample(
    data: &Dataset,
    spec: &EstimatorSpec,
    cfg: &BlbConfig,
    j: usize,
    rng: &RngStream,
) -> Result<SubsampleOutcome> {
    let n = data.n();
    let m = cfg.validate(n)?;
    let stream = rng.derive(j as u64);
    let rows = subsample_indices(n, m, false, &stream.derive(0))?;
    let fits: Vec<Result<Vec<f64>>> = (0..cfg.r)
        .into_par_iter()
        .map(|k| {
            let weights = cfg.weighting.draw(m, n, &stream.derive(k as u64 + 1))?;
            let sample = WeightedSample {
                indices: rows.clone(),
                weights,
                nominal: n,
            };
            fit(spec, data, &sample)
        })
        .collect();
    let mut estimates = Vec::with_capacity(cfg.r);
    let mut failures = Vec::new();
    for (k, f) in fits.into_iter().enumerate() {
        match f {
            Ok(e) => estimates.push(e),
            Err(e) => failures.push(FitFailure {
                subsample: Some(j),
                resample: k,
                message: e.to_string(),
            }),
        }
    }
    let values = if estimates.len() >= 2 {
        match cfg.functional.assess(&estimates) {
            Ok(v) => Some(v),
            Err(e) => {
                failures.push(FitFailure {
                    subsample: Some(j),
                    resample: cfg.r,
                    message: e.to_string(),
                });
                None
            }
        }
    } else {
        None
    };
    Ok(SubsampleOutcome {
        index: j,
        rows,
        estimates,
        values,
        failures,
        work_units: (cfg.r * m) as u64,
    })
}

/// Coordinate-wise mean of the retained subsample assessments.
pub fn average_assessments(outcomes: &[SubsampleOutcome]) -> Result<Vec<f64>> {
    let kept: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.values.as_ref()).collect();
    let first = kept.first().ok_or_else(|| Error::AllFailed {
        what: "BLB subsample",
        detail: outcomes
            .iter()
            .flat_map(|o| o.failures.first())
            .map(|f| f.message.clone())
            .next()
            .unwrap_or_default(),
    })?;
    let mut acc = vec![0.0; first.len()];
    for v in &kept {
        acc.iter_mut().zip(v.iter()).for_each(|(a, x)| *a += x);
    }
    let k = kept.len() as f64;
    Ok(acc.into_iter().map(|a| a / k).collect())
}

#[derive(Clone, Debug)]
pub struct BlbOutput {
    pub quality: QualityEstimate,
    pub subsamples: Vec<SubsampleOutcome>,
    /// Indices of subsamples whose assessment could not be formed.
    pub dropped: Vec<usize>,
}

/// Bag of little bootstraps. Subsamples are drawn independently of each
/// other (not as a partition of the rows).
pub fn blb(data: &Dataset, spec: &EstimatorSpec, cfg: &BlbConfig, rng: &RngStream) -> Result<BlbOutput> {
    let m = cfg.validate(data.n())?;
    let start = Instant::now();
    let subsamples = (0..cfg.s)
        .into_par_iter()
        .map(|j| blb_subsample(data, spec, cfg, j, rng))
        .collect::<Result<Vec<_>>>()?;
    let values = average_assessments(&subsamples)?;
    let dropped = subsamples
        .iter()
        .filter(|o| o.values.is_none())
        .map(|o| o.index)
        .collect();
    Ok(BlbOutput {
        quality: QualityEstimate {
            values,
            functional: cfg.functional,
            procedure: "blb",
            config: cfg.describe(m),
            work_units: subsamples.iter().map(|o| o.work_units).sum(),
            wallclock: start.elapsed().as_secs_f64(),
            failures: subsamples.iter().flat_map(|o| o.failures.clone()).collect(),
        },
        subsamples,
        dropped,
    })
}
