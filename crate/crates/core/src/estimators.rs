//! Weighted point estimators and the quality functionals computed from
//! their resampled distributions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{Dataset, WeightedSample};
use crate::error::{Error, Result};

/// Rows per work chunk when accumulating sufficient statistics. Chunk
/// boundaries are fixed, so the reduction order never depends on threads.
const CHUNK_ROWS: usize = 2048;
const PARALLEL_MIN_ROWS: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Mean,
    LinearRegression,
    LogisticRegression,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Mean => "mean",
            EstimatorKind::LinearRegression => "linear-regression",
            EstimatorKind::LogisticRegression => "logistic-regression",
        }
    }

    pub fn needs_response(&self) -> bool {
        !matches!(self, EstimatorKind::Mean)
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(EstimatorKind::Mean),
            "linear" | "linear-regression" => Ok(EstimatorKind::LinearRegression),
            "logistic" | "logistic-regression" => Ok(EstimatorKind::LogisticRegression),
            other => Err(Error::invalid(format!("unknown estimator kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub dim: usize,
    /// Gradient-norm tolerance for IRLS, measured on the weight-normalised
    /// log-likelihood.
    pub tol: f64,
    pub max_iters: usize,
    /// Diagonal jitter added to the normal equations.
    pub ridge: f64,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, dim: usize) -> Self {
        EstimatorSpec {
            kind,
            dim,
            tol: 1e-8,
            max_iters: 100,
            ridge: 1e-8,
        }
    }

    pub fn mean(dim: usize) -> Self {
        EstimatorSpec::new(EstimatorKind::Mean, dim)
    }

    pub fn logistic(dim: usize) -> Self {
        EstimatorSpec::new(EstimatorKind::LogisticRegression, dim)
    }

    pub fn linear(dim: usize) -> Self {
        EstimatorSpec::new(EstimatorKind::LinearRegression, dim)
    }
}

/// Fits the estimator to the weighted rows of `data`.
pub fn fit(spec: &EstimatorSpec, data: &Dataset, sample: &WeightedSample) -> Result<Vec<f64>> {
    if spec.dim != data.d() {
        return Err(Error::invalid(format!(
            "estimator dimension {} does not match dataset dimension {}",
            spec.dim,
            data.d()
        )));
    }
    sample.check_bounds(data.n())?;
    let total = sample.total_weight();
    if !(total > 0.0) {
        return Err(Error::invalid("all weights are zero"));
    }
    if spec.kind.needs_response() && data.response().is_none() {
        return Err(Error::invalid(format!("{} needs a response column", spec.kind.name())));
    }
    match spec.kind {
        EstimatorKind::Mean => Ok(weighted_mean(data, sample, total)),
        EstimatorKind::LinearRegression => weighted_least_squares(spec, data, sample, total),
        EstimatorKind::LogisticRegression => logistic_irls(spec, data, sample, total),
    }
}

fn weighted_mean(data: &Dataset, sample: &WeightedSample, total: f64) -> Vec<f64> {
    let mut acc = vec![0.0; data.d()];
    for (&i, &w) in sample.indices.iter().zip(&sample.weights) {
        if w == 0.0 {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(data.row(i)) {
            *a += w * x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

/// Weighted first and second moments over a chunk of the sample.
struct Moments {
    grad: Vec<f64>,
    hess: Vec<f64>,
    loglik: f64,
}

impl Moments {
    fn zeros(d: usize) -> Self {
        Moments {
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
            loglik: 0.0,
        }
    }

    fn add(mut self, other: Moments) -> Moments {
        self.grad.iter_mut().zip(other.grad).for_each(|(a, b)| *a += b);
        self.hess.iter_mut().zip(other.hess).for_each(|(a, b)| *a += b);
        self.loglik += other.loglik;
        self
    }
}

/// Accumulates over rows with a per-row closure returning
/// `(gradient coefficient, curvature weight, log-likelihood term)`.
fn accumulate<F>(data: &Dataset, sample: &WeightedSample, row_terms: F) -> Moments
where
    F: Fn(usize, &[f64]) -> (f64, f64, f64) + Sync,
{
    let d = data.d();
    let chunk = |range: std::ops::Range<usize>| {
        let mut m = Moments::zeros(d);
        for k in range {
            let w = sample.weights[k];
            if w == 0.0 {
                continue;
            }
            let i = sample.indices[k];
            let x = data.row(i);
            let (g, h, ll) = row_terms(i, x);
            m.loglik += w * ll;
            for a in 0..d {
                m.grad[a] += w * g * x[a];
                let wh = w * h * x[a];
                for b in a..d {
                    m.hess[a * d + b] += wh * x[b];
                }
            }
        }
        m
    };
    let len = sample.len();
    let ranges: Vec<_> = (0..len)
        .step_by(CHUNK_ROWS)
        .map(|s| s..(s + CHUNK_ROWS).min(len))
        .collect();
    let parts: Vec<Moments> = if len >= PARALLEL_MIN_ROWS {
        ranges.into_par_iter().map(chunk).collect()
    } else {
        ranges.into_iter().map(chunk).collect()
    };
    let mut total = parts.into_iter().fold(Moments::zeros(d), Moments::add);
    for a in 0..d {
        for b in 0..a {
            total.hess[a * d + b] = total.hess[b * d + a];
        }
    }
    total
}

fn check_rank(gram: &DMatrix<f64>) -> Result<()> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::SingularDesign(format!(
            "weighted design has eigenvalue range [{min:e}, {max:e}]"
        )));
    }
    Ok(())
}

fn weighted_least_squares(
    spec: &EstimatorSpec,
    data: &Dataset,
    sample: &WeightedSample,
    total: f64,
) -> Result<Vec<f64>> {
    let y = data.response().unwrap();
    let d = data.d();
    let m = accumulate(data, sample, |i, _| (y[i], 1.0, 0.0));
    let gram = DMatrix::from_row_slice(d, d, &m.hess) / total;
    check_rank(&gram)?;
    let rhs = DVector::from_vec(m.grad) / total;
    let system = gram + DMatrix::identity(d, d) * spec.ridge;
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::SingularDesign("normal equations are not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic_moments(data: &Dataset, sample: &WeightedSample, beta: &[f64]) -> Moments {
    let y = data.response().unwrap();
    accumulate(data, sample, |i, x| {
        let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let p = sigmoid(eta);
        (y[i] - p, p * (1.0 - p), y[i] * eta - softplus(eta))
    })
}

/// Weighted maximum likelihood by Newton's method (IRLS), with step halving
/// on the log-likelihood.
fn logistic_irls(
    spec: &EstimatorSpec,
    data: &Dataset,
    sample: &WeightedSample,
    total: f64,
) -> Result<Vec<f64>> {
    let d = data.d();
    let mut beta = vec![0.0; d];
    let mut m = logistic_moments(data, sample, &beta);
    // At beta = 0 the curvature is X'WX / 4.
    check_rank(&(DMatrix::from_row_slice(d, d, &m.hess) / total))?;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..spec.max_iters {
        let grad = DVector::from_vec(m.grad.clone()) / total;
        grad_norm = grad.norm();
        if grad_norm <= spec.tol {
            return Ok(beta);
        }
        let hess = DMatrix::from_row_slice(d, d, &m.hess) / total + DMatrix::identity(d, d) * spec.ridge;
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::SingularDesign("IRLS curvature is not positive definite".into()))?
            .solve(&grad);
        let current = m.loglik / total;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let tm = logistic_moments(data, sample, &trial);
            if tm.loglik / total >= current - 1e-14 * current.abs().max(1.0) {
                beta = trial;
                m = tm;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad = DVector::from_vec(m.grad.clone()) / total;
    if grad.norm() <= spec.tol {
        return Ok(beta);
    }
    grad_norm = grad_norm.min(grad.norm());
    Err(Error::NonConvergence {
        iterations: spec.max_iters,
        gradient_norm: grad_norm,
        iterate: beta,
    })
}

/// Normalised gradient norm of the weighted logistic log-likelihood at `beta`.
pub fn logistic_gradient_norm(data: &Dataset, sample: &WeightedSample, beta: &[f64]) -> f64 {
    let m = logistic_moments(data, sample, beta);
    let total = sample.total_weight();
    m.grad.iter().map(|g| (g / total).powi(2)).sum::<f64>().sqrt()
}

/// Per-coordinate confidence intervals at nominal level `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
}

impl IntervalSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, alpha: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid("interval bounds differ in length"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::invalid("lower bound above upper bound"));
        }
        Ok(IntervalSet { lower, upper, alpha })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn column(estimates: &[Vec<f64>], j: usize) -> Vec<f64> {
    let mut col: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
    col.sort_by(|a, b| a.total_cmp(b));
    col
}

fn check_estimates(estimates: &[Vec<f64>]) -> Result<usize> {
    if estimates.len() < 2 {
        return Err(Error::invalid("at least two estimates are required"));
    }
    let d = estimates[0].len();
    if estimates.iter().any(|e| e.len() != d) {
        return Err(Error::invalid("estimates differ in dimension"));
    }
    Ok(d)
}

/// Per-coordinate empirical `(alpha/2, 1 - alpha/2)` quantile interval.
pub fn percentile_interval(estimates: &[Vec<f64>], alpha: f64) -> Result<IntervalSet> {
    let d = check_estimates(estimates)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")));
    }
    let (mut lower, mut upper) = (Vec::with_capacity(d), Vec::with_capacity(d));
    for j in 0..d {
        let col = column(estimates, j);
        lower.push(quantile_sorted(&col, alpha / 2.0));
        upper.push(quantile_sorted(&col, 1.0 - alpha / 2.0));
    }
    IntervalSet::new(lower, upper, alpha)
}

/// Mean over coordinates of `|w_candidate - w_truth| / w_truth`.
pub fn relative_width_error(candidate: &[f64], truth: &[f64]) -> Result<f64> {
    if candidate.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid("width vectors differ in dimension"));
    }
    let mut acc = 0.0;
    for (c, t) in candidate.iter().zip(truth) {
        if *t == 0.0 {
            return Err(Error::UndefinedMetric("reference interval has zero width".into()));
        }
        acc += (c - t).abs() / t;
    }
    Ok(acc / truth.len() as f64)
}

pub fn relative_ci_error(candidate: &IntervalSet, truth: &IntervalSet) -> Result<f64> {
    if candidate.dim() != truth.dim() || candidate.alpha != truth.alpha {
        return Err(Error::invalid("interval sets differ in dimension or level"));
    }
    relative_width_error(&candidate.widths(), &truth.widths())
}

/// The assessment computed from a collection of resampled estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QualityFunctional {
    /// Percentile confidence-interval width at level `alpha`.
    CiWidth { alpha: f64 },
    /// Standard deviation of each coordinate.
    StdDev,
}

impl QualityFunctional {
    pub fn assess(&self, estimates: &[Vec<f64>]) -> Result<Vec<f64>> {
        match *self {
            QualityFunctional::CiWidth { alpha } => {
                Ok(percentile_interval(estimates, alpha)?.widths())
            }
            QualityFunctional::StdDev => {
                let d = check_estimates(estimates)?;
                let k = estimates.len() as f64;
                Ok((0..d)
                    .map(|j| {
                        let mean = estimates.iter().map(|e| e[j]).sum::<f64>() / k;
                        let ss = estimates.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>();
                        (ss / (k - 1.0)).sqrt()
                    })
                    .collect())
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            QualityFunctional::CiWidth { alpha } => format!("ci-width(alpha={alpha})"),
            QualityFunctional::StdDev => "stddev".to_string(),
        }
    }
}
