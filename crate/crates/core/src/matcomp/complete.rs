//! Nuclear-norm matrix completion by accelerated proximal gradient.
//!
//! Solves `min lambda ||L||_* + 1/2 sum_omega (L_ij - M_ij)^2` along a
//! decreasing `lambda` path. The constrained form
//! `min ||L||_* s.t. sum_omega (L_ij - M_ij)^2 <= delta^2` is handled by
//! searching `lambda` until the residual meets `delta^2`.

use nalgebra::{DMatrix, DVector};

use super::lowrank::LowRankEstimate;
use super::svd::{partial_svd, svt_capped, LinearOperator, PartialSvdOptions};
use crate::data::ObservedMatrix;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompletionMode {
    /// Lagrangian form with a fixed penalty.
    Penalized { lambda: f64 },
    /// Residual budget on the observed entries. `delta = 0` asks for
    /// interpolation of the observations.
    Constrained { delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionConfig {
    pub mode: CompletionMode,
    /// Proximal-gradient iterations allowed per value of lambda.
    pub max_iters: usize,
    /// Stop when the relative objective change falls below this.
    pub tol: f64,
    pub rank_cap: Option<usize>,
    /// Relative tolerance on `|residual^2 - delta^2| / delta^2`.
    pub delta_tol: f64,
    /// Dense SVD below this matrix dimension, block power iteration above.
    /// Dense is also used when the rank cap exceeds a quarter of the smaller
    /// dimension, where subspace iteration stops paying off.
    pub dense_below: usize,
    /// Factor by which lambda shrinks between continuation stages.
    pub continuation: f64,
    pub seed: u64,
}

impl CompletionConfig {
    pub fn penalized(lambda: f64) -> Self {
        CompletionConfig {
            mode: CompletionMode::Penalized { lambda },
            ..Self::constrained(0.0)
        }
    }

    pub fn constrained(delta: f64) -> Self {
        CompletionConfig {
            mode: CompletionMode::Constrained { delta },
            max_iters: 500,
            tol: 1e-7,
            rank_cap: None,
            delta_tol: 0.05,
            dense_below: 100,
            continuation: 0.5,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.mode {
            CompletionMode::Penalized { lambda } if !(lambda > 0.0) => {
                Err(Error::invalid(format!("lambda {lambda} must be positive")))
            }
            CompletionMode::Constrained { delta } if !(delta >= 0.0) => {
                Err(Error::invalid(format!("delta {delta} must be nonnegative")))
            }
            _ if !(self.continuation > 0.0 && self.continuation < 1.0) => {
                Err(Error::invalid("continuation factor must be in (0, 1)"))
            }
            _ if self.max_iters == 0 => Err(Error::invalid("max_iters must be positive")),
            _ => Ok(()),
        }
    }
}

/// Objective values recorded while solving for one value of lambda: the
/// starting objective followed by the objective after every momentum restart.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTrace {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_objectives: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CompletionOutput {
    pub estimate: LowRankEstimate,
    /// False when an iteration budget ran out; the estimate is then the best
    /// iterate reached.
    pub converged: bool,
    pub lambda: f64,
    pub residual_sq: f64,
    pub iterations: usize,
    pub stages: Vec<StageTrace>,
}

/// Observed entries grouped for fast sparse products.
struct SparsePattern {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparsePattern {
    fn new(obs: &ObservedMatrix) -> Self {
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by_key(|&k| (obs.omega()[k].1, obs.omega()[k].0));
        SparsePattern {
            nrows: obs.nrows(),
            ncols: obs.ncols(),
            rows: order.iter().map(|&k| obs.omega()[k].0).collect(),
            cols: order.iter().map(|&k| obs.omega()[k].1).collect(),
            values: order.iter().map(|&k| obs.values()[k]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    /// Entries of a factored matrix on the pattern.
    fn sample(&self, est: &LowRankEstimate) -> Vec<f64> {
        let k = est.rank();
        if k == 0 {
            return vec![0.0; self.len()];
        }
        let us = est.scaled_left();
        let v = est.v();
        self.rows
            .iter()
            .zip(&self.cols)
            .map(|(&i, &j)| (0..k).map(|l| us[(i, l)] * v[(j, l)]).sum())
            .collect()
    }
}

/// `c1 * X1 + c2 * X2 + S` with `S` supported on the observed pattern.
struct GradientStep<'a> {
    pattern: &'a SparsePattern,
    terms: [(f64, &'a LowRankEstimate); 2],
    sparse: Vec<f64>,
}

impl LinearOperator for GradientStep<'_> {
    fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.pattern.nrows, x.ncols());
        for (c, est) in self.terms {
            if c != 0.0 && est.rank() > 0 {
                out += est.scaled_left() * (est.v().tr_mul(x)) * c;
            }
        }
        for b in 0..x.ncols() {
            let xc = x.column(b);
            let mut oc = out.column_mut(b);
            for k in 0..self.pattern.len() {
                oc[self.pattern.rows[k]] += self.sparse[k] * xc[self.pattern.cols[k]];
            }
        }
        out
    }

    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.pattern.ncols, y.ncols());
        for (c, est) in self.terms {
            if c != 0.0 && est.rank() > 0 {
                out += est.v() * (est.scaled_left().tr_mul(y)) * c;
            }
        }
        for b in 0..y.ncols() {
            let yc = y.column(b);
            let mut oc = out.column_mut(b);
            for k in 0..self.pattern.len() {
                oc[self.pattern.cols[k]] += self.sparse[k] * yc[self.pattern.rows[k]];
            }
        }
        out
    }
}

impl GradientStep<'_> {
    fn dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.pattern.nrows, self.pattern.ncols);
        for (c, est) in self.terms {
            if c != 0.0 && est.rank() > 0 {
                out += est.dense_unchecked() * c;
            }
        }
        for k in 0..self.pattern.len() {
            out[(self.pattern.rows[k], self.pattern.cols[k])] += self.sparse[k];
        }
        out
    }
}

#[derive(Clone)]
struct Iterate {
    est: LowRankEstimate,
    on_pattern: Vec<f64>,
}

impl Iterate {
    fn new(est: LowRankEstimate, pattern: &SparsePattern) -> Self {
        let on_pattern = pattern.sample(&est);
        Iterate { est, on_pattern }
    }

    fn residual_sq(&self, pattern: &SparsePattern) -> f64 {
        self.on_pattern
            .iter()
            .zip(&pattern.values)
            .map(|(x, m)| (x - m).powi(2))
            .sum()
    }

    fn objective(&self, pattern: &SparsePattern, lambda: f64) -> f64 {
        lambda * self.est.nuclear_norm() + 0.5 * self.residual_sq(pattern)
    }
}

struct Solver<'a> {
    pattern: SparsePattern,
    cfg: &'a CompletionConfig,
    rank_cap: usize,
    dense: bool,
    svd_calls: u64,
}

impl Solver<'_> {
    /// Proximal step at the extrapolated point `x + beta (x - x_prev)`.
    fn prox(&mut self, x: &Iterate, x_prev: &Iterate, beta: f64, lambda: f64) -> Result<Iterate> {
        let sparse: Vec<f64> = (0..self.pattern.len())
            .map(|k| {
                let y = (1.0 + beta) * x.on_pattern[k] - beta * x_prev.on_pattern[k];
                self.pattern.values[k] - y
            })
            .collect();
        let step = GradientStep {
            pattern: &self.pattern,
            terms: [(1.0 + beta, &x.est), (-beta, &x_prev.est)],
            sparse,
        };
        let est = if self.dense {
            svt_capped(&step.dense(), lambda, self.rank_cap)?
        } else {
            partial_svt(self.cfg, self.rank_cap, &mut self.svd_calls, &step, x, lambda)?
        };
        Ok(Iterate::new(est, &self.pattern))
    }

    /// Accelerated proximal gradient at fixed lambda, restarting momentum
    /// whenever the extrapolated step would increase the objective.
    fn solve(&mut self, start: Iterate, lambda: f64) -> Result<(Iterate, StageTrace)> {
        let mut x = start;
        let mut x_prev = x.clone();
        let mut f = x.objective(&self.pattern, lambda);
        let mut t = 1.0f64;
        let mut trace = StageTrace {
            lambda,
            iterations: 0,
            converged: false,
            restart_objectives: vec![f],
        };
        for it in 1..=self.cfg.max_iters {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            let mut cand = self.prox(&x, &x_prev, beta, lambda)?;
            let mut f_cand = cand.objective(&self.pattern, lambda);
            if f_cand > f && beta > 0.0 {
                cand = self.prox(&x, &x, 0.0, lambda)?;
                f_cand = cand.objective(&self.pattern, lambda);
                trace.restart_objectives.push(f_cand);
                t = 1.0;
            } else {
                t = t_next;
            }
            let rel = (f - f_cand).abs() / f.abs().max(f64::MIN_POSITIVE);
            x_prev = std::mem::replace(&mut x, cand);
            f = f_cand;
            trace.iterations = it;
            if rel < self.cfg.tol {
                trace.converged = true;
                break;
            }
        }
        Ok((x, trace))
    }

    fn spectral_norm(&mut self) -> Result<f64> {
        let zero = LowRankEstimate::zero(self.pattern.nrows, self.pattern.ncols);
        let op = GradientStep {
            pattern: &self.pattern,
            terms: [(0.0, &zero), (0.0, &zero)],
            sparse: self.pattern.values.clone(),
        };
        if self.dense {
            let s = crate::linalg::singular_values(&op.dense())?;
            Ok(s.iter().cloned().fold(0.0, f64::max))
        } else {
            let opts = PartialSvdOptions {
                rank: 1,
                oversample: 4,
                tol: 1e-6,
                max_iters: 200,
            };
            let (_, s, _) = partial_svd(&op, &opts, None, &RngStream::new(self.cfg.seed, u64::MAX))?;
            Ok(s[0])
        }
    }
}

fn partial_svt(
    cfg: &CompletionConfig,
    rank_cap: usize,
    svd_calls: &mut u64,
    step: &GradientStep,
    x: &Iterate,
    lambda: f64,
) -> Result<LowRankEstimate> {
    let mut k = (x.est.rank() + 5).max(10).min(rank_cap);
    loop {
        *svd_calls += 1;
        let opts = PartialSvdOptions {
            rank: k,
            ..Default::default()
        };
        let stream = RngStream::new(cfg.seed, *svd_calls);
        let (u, s, v) = partial_svd(step, &opts, Some(x.est.v()), &stream)?;
        let above = s.iter().filter(|&&x| x > lambda).count();
        if above < s.len() || k >= rank_cap {
            let keep = above.min(rank_cap);
            let shrunk = DVector::from_iterator(keep, s.iter().take(keep).map(|x| x - lambda));
            return LowRankEstimate::new(
                u.columns(0, keep).into_owned(),
                shrunk,
                v.columns(0, keep).into_owned(),
            );
        }
        k = (2 * k).min(rank_cap);
    }
}

struct PathPoint {
    lambda: f64,
    iterate: Iterate,
    converged: bool,
}

/// Completes `observed` according to `cfg`.
pub fn complete(observed: &ObservedMatrix, cfg: &CompletionConfig) -> Result<CompletionOutput> {
    cfg.validate()?;
    let (m, n) = (observed.nrows(), observed.ncols());
    let full_rank = m.min(n);
    let rank_cap = cfg.rank_cap.unwrap_or(full_rank).clamp(1, full_rank);
    let mut solver = Solver {
        pattern: SparsePattern::new(observed),
        cfg,
        rank_cap,
        dense: full_rank < cfg.dense_below || 4 * rank_cap > full_rank,
        svd_calls: 0,
    };
    let total_sq = observed.sum_of_squares();
    let zero = Iterate::new(LowRankEstimate::zero(m, n), &solver.pattern);
    let lambda_max = solver.spectral_norm()?;
    let mut stages = Vec::new();
    let finish = |p: PathPoint, stages: Vec<StageTrace>, pattern: &SparsePattern| CompletionOutput {
        residual_sq: p.iterate.residual_sq(pattern),
        iterations: stages.iter().map(|s| s.iterations).sum(),
        converged: p.converged,
        lambda: p.lambda,
        estimate: p.iterate.est,
        stages,
    };
    if lambda_max == 0.0 {
        let p = PathPoint { lambda: 0.0, iterate: zero, converged: true };
        return Ok(finish(p, stages, &solver.pattern));
    }

    match cfg.mode {
        CompletionMode::Penalized { lambda } => {
            let mut current = zero;
            let mut level = lambda_max;
            let converged = loop {
                level = (level * cfg.continuation).max(lambda);
                let (it, trace) = solver.solve(current, level)?;
                let converged = trace.converged;
                stages.push(trace);
                current = it;
                if level <= lambda {
                    break converged;
                }
            };
            let p = PathPoint { lambda, iterate: current, converged };
            Ok(finish(p, stages, &solver.pattern))
        }
        CompletionMode::Constrained { delta } => {
            let target = delta * delta;
            if target >= total_sq {
                let p = PathPoint { lambda: lambda_max, iterate: zero, converged: true };
                return Ok(finish(p, stages, &solver.pattern));
            }
            // Walk down the path until the residual budget is met.
            let floor = lambda_max * 1e-12;
            let mut hi = PathPoint { lambda: lambda_max, iterate: zero, converged: true };
            let lo = loop {
                let level = hi.lambda * cfg.continuation;
                let (it, trace) = solver.solve(hi.iterate.clone(), level)?;
                let converged = trace.converged;
                stages.push(trace);
                let res = it.residual_sq(&solver.pattern);
                let point = PathPoint { lambda: level, iterate: it, converged };
                if target == 0.0 {
                    // Interpolation: stop once the residual is negligible.
                    if res <= (cfg.tol * 1e-7) * total_sq || level <= floor {
                        return Ok(finish(point, stages, &solver.pattern));
                    }
                } else if res <= target {
                    break point;
                }
                if level <= floor {
                    return Ok(finish(point, stages, &solver.pattern));
                }
                hi = point;
            };
            let within = |res: f64| (res - target).abs() <= cfg.delta_tol * target;
            if within(lo.iterate.residual_sq(&solver.pattern)) {
                return Ok(finish(lo, stages, &solver.pattern));
            }
            // Bisection on log(lambda); residual^2 increases with lambda.
            let (mut lo, mut hi) = (lo, hi);
            for _ in 0..60 {
                let mid = (lo.lambda * hi.lambda).sqrt();
                let (it, trace) = solver.solve(lo.iterate.clone(), mid)?;
                let converged = trace.converged;
                stages.push(trace);
                let res = it.residual_sq(&solver.pattern);
                let point = PathPoint { lambda: mid, iterate: it, converged };
                if within(res) {
                    return Ok(finish(point, stages, &solver.pattern));
                }
                if res < target {
                    lo = point;
                } else {
                    hi = point;
                }
                if hi.lambda / lo.lambda < 1.0 + 1e-9 {
                    break;
                }
            }
            let mut out = finish(lo, stages, &solver.pattern);
            out.converged = false;
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_omega;
    use rand_distr::{Distribution, StandardNormal};

    fn low_rank(m: usize, n: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RngStream::from_seed(seed).rng();
        let a = DMatrix::from_fn(m, r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let b = DMatrix::from_fn(n, r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        a * b.transpose()
    }

    fn observe(l0: &DMatrix<f64>, frac: f64, seed: u64) -> ObservedMatrix {
        let (m, n) = l0.shape();
        let s = (frac * (m * n) as f64).round() as usize;
        let omega = sample_omega(m, n, s, &RngStream::from_seed(seed)).unwrap();
        let values = omega.iter().map(|&(i, j)| l0[(i, j)]).collect();
        ObservedMatrix::new(m, n, omega, values).unwrap()
    }

    fn rel_error(est: &LowRankEstimate, l0: &DMatrix<f64>) -> f64 {
        (est.to_dense().unwrap() - l0).norm() / l0.norm()
    }

    #[test]
    fn fully_observed_rank_one_is_recovered() {
        let l0 = DMatrix::from_fn(4, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let obs = ObservedMatrix::from_fn(4, 4, (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect(), |i, j| l0[(i, j)]).unwrap();
        let out = complete(&obs, &CompletionConfig::constrained(0.0)).unwrap();
        assert!(rel_error(&out.estimate, &l0) < 1e-6, "{}", rel_error(&out.estimate, &l0));
        assert_eq!(out.estimate.rank(), 1);
    }

    #[test]
    fn noiseless_low_rank_recovery() {
        let l0 = low_rank(200, 200, 5, 1);
        let obs = observe(&l0, 0.25, 2);
        let out = complete(&obs, &CompletionConfig::constrained(0.0)).unwrap();
        let err = rel_error(&out.estimate, &l0);
        eprintln!("rel error {err:e}, iterations {}, stages {}", out.iterations, out.stages.len());
        assert!(err < 1e-3, "{err}");
        assert!(out.estimate.orthonormality_error() <= 1e-8);
    }

    #[test]
    fn restart_objectives_are_monotone() {
        let l0 = low_rank(60, 50, 3, 3);
        let obs = observe(&l0, 0.4, 4);
        let out = complete(&obs, &CompletionConfig::penalized(0.5)).unwrap();
        for stage in &out.stages {
            for w in stage.restart_objectives.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
            }
        }
    }

    #[test]
    fn delta_mode_meets_budget() {
        let l0 = low_rank(80, 60, 4, 5);
        let obs = observe(&l0, 0.3, 6);
        let mut rng = RngStream::from_seed(7).rng();
        let sigma = 0.1;
        let noisy: Vec<f64> = obs.values().iter().map(|v| v + sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let obs = ObservedMatrix::new(80, 60, obs.omega().to_vec(), noisy).unwrap();
        let delta = sigma * (obs.len() as f64).sqrt();
        let out = complete(&obs, &CompletionConfig::constrained(delta)).unwrap();
        let target = delta * delta;
        assert!((out.residual_sq - target).abs() / target <= 0.05, "{} vs {}", out.residual_sq, target);
        assert!(out.converged);
    }

    #[test]
    fn infeasible_budget_returns_zero() {
        let l0 = low_rank(10, 10, 1, 8);
        let obs = observe(&l0, 0.5, 9);
        let out = complete(&obs, &CompletionConfig::constrained(obs.sum_of_squares().sqrt() * 1.01)).unwrap();
        assert_eq!(out.estimate.rank(), 0);
    }

    #[test]
    fn partial_svd_path_matches_dense() {
        let l0 = low_rank(90, 70, 3, 10);
        let obs = observe(&l0, 0.4, 11);
        let dense = complete(&obs, &CompletionConfig::penalized(1.0)).unwrap();
        let cfg = CompletionConfig {
            dense_below: 10,
            rank_cap: Some(20),
            ..CompletionConfig::penalized(1.0)
        };
        let sparse = complete(&obs, &cfg).unwrap();
        let d = dense.estimate.frobenius_distance(&sparse.estimate) / dense.estimate.frobenius_norm();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn rejects_bad_config() {
        let obs = ObservedMatrix::new(2, 2, vec![(0, 0)], vec![1.0]).unwrap();
        assert!(complete(&obs, &CompletionConfig::penalized(0.0)).is_err());
        assert!(complete(&obs, &CompletionConfig::constrained(-1.0)).is_err());
    }
}
