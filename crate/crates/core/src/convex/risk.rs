use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::cone::mean_and_se;
use super::{check_dim, ConvexBody, Projection};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Shrinkage estimate: the projection of the sufficient statistic onto the body.
pub fn shrink<B: ConvexBody + ?Sized>(ybar: &[f64], body: &B) -> Result<Projection> {
    check_dim(body.dim(), ybar)?;
    body.project(ybar)
}

/// Denoising `n` observations `x* + sigma z_i`, summarised by their mean.
pub struct DenoiseProblem<'a> {
    pub x_star: Vec<f64>,
    pub sigma: f64,
    pub n: u64,
    pub body: &'a dyn ConvexBody,
}

impl DenoiseProblem<'_> {
    fn validate(&self) -> Result<()> {
        check_dim(self.body.dim(), &self.x_star)?;
        if !(self.sigma > 0.0) || self.n == 0 {
            return Err(Error::invalid(format!(
                "need sigma > 0 and n >= 1, got {} and {}",
                self.sigma, self.n
            )));
        }
        Ok(())
    }

    /// Standard deviation of each coordinate of the sample mean.
    pub fn scale(&self) -> f64 {
        self.sigma / (self.n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Trials whose projection stopped before meeting its tolerance. They
    /// are still counted.
    pub unconverged: usize,
    /// Summed wallclock of the projections, in seconds.
    pub projection_seconds: f64,
}

/// Monte Carlo estimate of `E ||x* - P_C(ybar)||^2` with
/// `ybar = x* + (sigma / sqrt(n)) z`.
pub fn risk_mc(problem: &DenoiseProblem<'_>, trials: usize, rng: &RngStream) -> Result<RiskEstimate> {
    problem.validate()?;
    if trials < 2 {
        return Err(Error::invalid("risk estimation needs at least two trials"));
    }
    let scale = problem.scale();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.derive(t as u64).rng();
            let ybar: Vec<f64> = problem
                .x_star
                .iter()
                .map(|x| x + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r))
                .collect();
            let start = Instant::now();
            let proj = shrink(&ybar, problem.body)?;
            let secs = start.elapsed().as_secs_f64();
            let err: f64 = proj.point.iter().zip(&problem.x_star).map(|(a, b)| (a - b).powi(2)).sum();
            Ok((err, proj.converged, secs))
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(outcomes.len(), trials);
    let errors: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let (mean, std_error) = mean_and_se(&errors)?;
    Ok(RiskEstimate {
        mean,
        std_error,
        trials,
        unconverged: outcomes.iter().filter(|o| !o.1).count(),
        projection_seconds: outcomes.iter().map(|o| o.2).sum(),
    })
}
