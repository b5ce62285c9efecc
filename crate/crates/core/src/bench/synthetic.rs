//! Synthetic data for the experiments.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, ObservedMatrix};
use crate::error::Result;
use crate::rng::RngStream;
use crate::sampling::sample_omega;

/// Logistic-regression data: standard normal features, every coefficient
/// equal to `coefficient`, labels drawn from the logistic model.
pub fn logistic_dataset(n: usize, d: usize, coefficient: f64, rng: &RngStream) -> Result<Dataset> {
    let mut r = rng.rng();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut eta = 0.0;
        for _ in 0..d {
            let x: f64 = StandardNormal.sample(&mut r);
            eta += coefficient * x;
            features.push(x);
        }
        let p = 1.0 / (1.0 + (-eta).exp());
        labels.push(if r.random::<f64>() < p { 1.0 } else { 0.0 });
    }
    Dataset::new(features, d, Some(labels))
}

/// A completion instance: the ground truth and its noisy observed entries.
pub struct LowRankInstance {
    pub truth: DMatrix<f64>,
    pub observed: ObservedMatrix,
    /// Noise budget `sigma sqrt(|Omega|)` matching the observation noise.
    pub delta: f64,
}

/// `L0 = A B^T / sqrt(r)` with standard normal factors, so entries have unit
/// variance; a `fraction` of entries observed with additive `N(0, noise^2)`.
pub fn low_rank_instance(
    m: usize,
    n: usize,
    rank: usize,
    fraction: f64,
    noise: f64,
    rng: &RngStream,
) -> Result<LowRankInstance> {
    let mut r = rng.derive(0).rng();
    let a = DMatrix::from_fn(m, rank, |_, _| -> f64 { StandardNormal.sample(&mut r) });
    let b = DMatrix::from_fn(n, rank, |_, _| -> f64 { StandardNormal.sample(&mut r) });
    let truth = a * b.transpose() / (rank as f64).sqrt();
    let count = ((fraction * (m * n) as f64).round() as usize).clamp(1, m * n);
    let omega = sample_omega(m, n, count, &rng.derive(1))?;
    let mut r = rng.derive(2).rng();
    let values = omega
        .iter()
        .map(|&(i, j)| truth[(i, j)] + noise * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r))
        .collect();
    let observed = ObservedMatrix::new(m, n, omega, values)?;
    let delta = noise * (observed.len() as f64).sqrt();
    Ok(LowRankInstance { truth, observed, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_labels_follow_model() {
        let ds = logistic_dataset(20_000, 2, 0.0, &RngStream::from_seed(1)).unwrap();
        let mean = ds.response().unwrap().iter().sum::<f64>() / 20_000.0;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn instance_shapes_and_budget() {
        let inst = low_rank_instance(30, 20, 2, 0.25, 0.5, &RngStream::from_seed(2)).unwrap();
        assert_eq!(inst.observed.len(), 150);
        assert!((inst.delta - 0.5 * 150f64.sqrt()).abs() < 1e-12);
        let svals = crate::linalg::singular_values(&inst.truth).unwrap();
        assert!(svals[2] < 1e-10 * svals[0]);
    }
}
