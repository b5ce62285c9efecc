//! Divide-Factor-Combine matrix completion: split the columns into `t`
//! blocks, complete each block independently, then project every block
//! estimate onto a common column space.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::ObservedMatrix;
use crate::error::{Error, Result};
use crate::matcomp::{complete, CompletionConfig, CompletionMode, CompletionOutput, LowRankEstimate};
use crate::rng::RngStream;

/// Singular values below this fraction of the largest are treated as zero
/// when forming a column-space projector.
pub const PINV_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DfcConfig {
    pub t: usize,
    pub ensemble: bool,
    pub base: CompletionConfig,
    /// Upper bound on concurrently running block completions.
    pub parallelism: usize,
    pub seed: u64,
}

impl DfcConfig {
    pub fn new(t: usize, base: CompletionConfig) -> Self {
        DfcConfig {
            t,
            ensemble: false,
            base,
            parallelism: 1,
            seed: 0,
        }
    }
}

/// One column block: its observations re-indexed to local columns, and the
/// original column of each local column.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnBlock {
    pub observed: ObservedMatrix,
    pub columns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnPartition {
    pub blocks: Vec<ColumnBlock>,
    /// `permutation[p]` is the original column placed at position `p`.
    pub permutation: Vec<usize>,
}

impl ColumnPartition {
    /// Maps every block's observations back to original coordinates.
    pub fn restore_omega(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .flat_map(|b| b.observed.omega().iter().map(|&(i, j)| (i, b.columns[j])))
            .collect()
    }
}

/// Sizes of `t` contiguous blocks covering `n` columns, differing by at most one.
pub fn block_sizes(n: usize, t: usize) -> Vec<usize> {
    let (l, extra) = (n / t, n % t);
    (0..t).map(|i| l + usize::from(i < extra)).collect()
}

fn split_by_permutation(observed: &ObservedMatrix, t: usize, permutation: Vec<usize>) -> Result<ColumnPartition> {
    let n = observed.ncols();
    let sizes = block_sizes(n, t);
    // position of each original column, and which block owns it
    let mut block_of = vec![0usize; n];
    let mut local_of = vec![0usize; n];
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(t);
    let mut pos = 0;
    for (b, &size) in sizes.iter().enumerate() {
        let cols = permutation[pos..pos + size].to_vec();
        for (local, &c) in cols.iter().enumerate() {
            block_of[c] = b;
            local_of[c] = local;
        }
        columns.push(cols);
        pos += size;
    }
    let mut omegas: Vec<Vec<(usize, usize)>> = vec![Vec::new(); t];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); t];
    for (i, j, v) in observed.iter() {
        omegas[block_of[j]].push((i, local_of[j]));
        values[block_of[j]].push(v);
    }
    let blocks = columns
        .into_iter()
        .zip(omegas.into_iter().zip(values))
        .map(|(cols, (om, vals))| {
            if om.is_empty() {
                return Err(Error::invalid(format!(
                    "a column block of {} columns has no observed entries",
                    cols.len()
                )));
            }
            Ok(ColumnBlock {
                observed: ObservedMatrix::new(observed.nrows(), cols.len(), om, vals)?,
                columns: cols,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ColumnPartition { blocks, permutation })
}

/// Randomly permutes the columns and splits them into `t` contiguous blocks.
pub fn partition_columns(observed: &ObservedMatrix, t: usize, rng: &RngStream) -> Result<ColumnPartition> {
    let n = observed.ncols();
    if t == 0 || t > n {
        return Err(Error::invalid(format!("cannot split {n} columns into {t} blocks")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    perm.shuffle(&mut rng.rng());
    split_by_permutation(observed, t, perm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagnostics {
    pub columns: usize,
    pub observed: usize,
    pub rank: usize,
    pub residual_sq: f64,
    pub converged: bool,
    pub wallclock: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct DfcResult {
    pub estimate: LowRankEstimate,
    pub diagnostics: Vec<BlockDiagnostics>,
    pub factor_wallclock: f64,
    pub combine_wallclock: f64,
    pub permutation: Vec<usize>,
}

/// Columns of `U^T U_i S_i V_i^T` for every block, placed at their original
/// column positions: the coefficients of all block estimates in the basis `U`.
fn coefficients(basis: &DMatrix<f64>, blocks: &[(&ColumnBlock, &LowRankEstimate)], n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(basis.ncols(), n);
    for (block, est) in blocks {
        if est.rank() == 0 {
            continue;
        }
        let local = (basis.tr_mul(est.u()) * DMatrix::from_diagonal(est.sigma())) * est.v().transpose();
        for (q, &c) in block.columns.iter().enumerate() {
            w.column_mut(c).copy_from(&local.column(q));
        }
    }
    w
}

/// Orthonormal basis of the column space of `est`, ignoring singular values
/// below [`PINV_REL_TOL`] times the largest.
pub fn column_basis(est: &LowRankEstimate) -> DMatrix<f64> {
    let smax = est.sigma().iter().cloned().fold(0.0, f64::max);
    let keep = est.sigma().iter().filter(|&&s| s > PINV_REL_TOL * smax).count();
    est.u().columns(0, keep).into_owned()
}

/// Projects the columns of `est` onto the span of the orthonormal `basis`.
pub fn project_onto_column_space(est: &LowRankEstimate, basis: &DMatrix<f64>) -> Result<LowRankEstimate> {
    let coeffs = basis.tr_mul(&est.scaled_left());
    LowRankEstimate::from_factors(&(basis * coeffs), est.v(), PINV_REL_TOL)
}

/// Combines block estimates by projecting onto the first block's column
/// space, or with `ensemble` by averaging the projections onto every block.
pub fn combine(blocks: &[(&ColumnBlock, &LowRankEstimate)], nrows: usize, ncols: usize, ensemble: bool) -> Result<LowRankEstimate> {
    if blocks.is_empty() {
        return Err(Error::invalid("nothing to combine"));
    }
    if !ensemble {
        let basis = column_basis(blocks[0].1);
        let w = coefficients(&basis, blocks, ncols);
        return LowRankEstimate::from_factors(&basis, &w.transpose(), PINV_REL_TOL);
    }
    let t = blocks.len() as f64;
    let bases: Vec<DMatrix<f64>> = blocks.iter().map(|(_, e)| column_basis(e)).collect();
    let total: usize = bases.iter().map(|b| b.ncols()).sum();
    if total == 0 {
        return Ok(LowRankEstimate::zero(nrows, ncols));
    }
    let mut left = DMatrix::zeros(nrows, total);
    let mut right = DMatrix::zeros(ncols, total);
    let mut at = 0;
    for basis in &bases {
        let k = basis.ncols();
        if k == 0 {
            continue;
        }
        left.columns_mut(at, k).copy_from(basis);
        let w = coefficients(basis, blocks, ncols) / t;
        right.columns_mut(at, k).copy_from(&w.transpose());
        at += k;
    }
    LowRankEstimate::from_factors(&left, &right, PINV_REL_TOL)
}

fn block_config(base: &CompletionConfig, block_obs: usize, total_obs: usize, seed: u64) -> CompletionConfig {
    let mut cfg = base.clone();
    if let CompletionMode::Constrained { delta } = base.mode {
        cfg.mode = CompletionMode::Constrained {
            delta: delta * (block_obs as f64 / total_obs as f64).sqrt(),
        };
    }
    cfg.seed = seed;
    cfg
}

/// DFC with projection combining.
///
/// With `t = 1` no permutation is applied and the block estimate is returned
/// unchanged, so the result equals [`complete`] on the same input.
pub fn dfc_proj(observed: &ObservedMatrix, cfg: &DfcConfig) -> Result<DfcResult> {
    let n = observed.ncols();
    if cfg.t == 0 || cfg.t > n {
        return Err(Error::invalid(format!("cannot split {n} columns into {} blocks", cfg.t)));
    }
    let partition = if cfg.t == 1 {
        split_by_permutation(observed, 1, (0..n).collect())?
    } else {
        partition_columns(observed, cfg.t, &RngStream::from_seed(cfg.seed))?
    };
    let total_obs = observed.len();
    let factor_start = Instant::now();
    let run_block = |(b, block): (usize, &ColumnBlock)| {
        let seed = if b == 0 { cfg.base.seed } else { RngStream::new(cfg.base.seed, b as u64).derive(0).stream_id() };
        let bcfg = block_config(&cfg.base, block.observed.len(), total_obs, seed);
        let start = Instant::now();
        let out = complete(&block.observed, &bcfg);
        (out, start.elapsed().as_secs_f64())
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| Error::numerical(e.to_string()))?;
    let results: Vec<(Result<CompletionOutput>, f64)> =
        pool.install(|| partition.blocks.par_iter().enumerate().map(run_block).collect());
    let factor_wallclock = factor_start.elapsed().as_secs_f64();

    let diagnostics: Vec<BlockDiagnostics> = partition
        .blocks
        .iter()
        .zip(&results)
        .map(|(block, (res, secs))| match res {
            Ok(out) => BlockDiagnostics {
                columns: block.columns.len(),
                observed: block.observed.len(),
                rank: out.estimate.rank(),
                residual_sq: out.residual_sq,
                converged: out.converged,
                wallclock: *secs,
                error: None,
            },
            Err(e) => BlockDiagnostics {
                columns: block.columns.len(),
                observed: block.observed.len(),
                rank: 0,
                residual_sq: f64::NAN,
                converged: false,
                wallclock: *secs,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let succeeded: Vec<(&ColumnBlock, &LowRankEstimate)> = partition
        .blocks
        .iter()
        .zip(&results)
        .filter_map(|(b, (r, _))| r.as_ref().ok().map(|o| (b, &o.estimate)))
        .collect();
    if succeeded.is_empty() {
        return Err(Error::AllFailed {
            what: "column block",
            detail: diagnostics.iter().find_map(|d| d.error.clone()).unwrap_or_default(),
        });
    }

    let combine_start = Instant::now();
    let estimate = if cfg.t == 1 {
        succeeded[0].1.clone()
    } else {
        combine(&succeeded, observed.nrows(), n, cfg.ensemble)?
    };
    Ok(DfcResult {
        estimate,
        diagnostics,
        factor_wallclock,
        combine_wallclock: combine_start.elapsed().as_secs_f64(),
        permutation: partition.permutation,
    })
}

/// Columns per block sufficient for the projection estimate to stay within
/// `(2 + eps)` of the base guarantee: `c mu^2 r^2 (m+n) n ln^2(m+n) / (s eps^2)`.
/// The constant `c` is not known and must be supplied.
pub fn theorem2_column_bound(m: f64, n: f64, s: f64, mu: f64, r: f64, eps: f64, c: f64) -> f64 {
    let mn = m + n;
    c * mu * mu * r * r * mn * n * mn.ln().powi(2) / (s * eps * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_omega;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};
    use std::collections::BTreeSet;

    fn instance(m: usize, n: usize, r: usize, frac: f64, seed: u64) -> (DMatrix<f64>, ObservedMatrix) {
        let mut rng = RngStream::from_seed(seed).rng();
        let a = DMatrix::from_fn(m, r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let b = DMatrix::from_fn(n, r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let l0 = a * b.transpose();
        let s = (frac * (m * n) as f64).round() as usize;
        let omega = sample_omega(m, n, s, &RngStream::new(seed, 1)).unwrap();
        let obs = ObservedMatrix::from_fn(m, n, omega, |i, j| l0[(i, j)]).unwrap();
        (l0, obs)
    }

    fn omega_set(obs: &ObservedMatrix) -> BTreeSet<(usize, usize)> {
        obs.omega().iter().cloned().collect()
    }

    #[test]
    fn block_sizes_balance() {
        assert_eq!(block_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(block_sizes(8, 4), vec![2, 2, 2, 2]);
        assert_eq!(block_sizes(5, 5), vec![1; 5]);
    }

    #[test]
    fn one_column_per_block() {
        let (_, obs) = instance(6, 5, 1, 1.0, 1);
        let p = partition_columns(&obs, 5, &RngStream::from_seed(2)).unwrap();
        assert_eq!(p.blocks.len(), 5);
        assert!(p.blocks.iter().all(|b| b.observed.ncols() == 1 && b.observed.len() == 6));
        assert!(partition_columns(&obs, 6, &RngStream::from_seed(2)).is_err());
    }

    proptest! {
        #[test]
        fn partition_restores_omega(seed in 0u64..500, t in 1usize..6) {
            let (_, obs) = instance(9, 12, 2, 0.6, seed);
            let p = partition_columns(&obs, t, &RngStream::from_seed(seed)).unwrap();
            let back: BTreeSet<_> = p.restore_omega().into_iter().collect();
            prop_assert_eq!(back.len(), obs.len());
            prop_assert_eq!(back, omega_set(&obs));
            let mut sorted = p.permutation.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..12).collect::<Vec<_>>());
            let concat: Vec<usize> = p.blocks.iter().flat_map(|b| b.columns.clone()).collect();
            prop_assert_eq!(concat, p.permutation.clone());
        }
    }

    #[test]
    fn single_block_equals_base() {
        let (_, obs) = instance(40, 30, 2, 0.5, 3);
        let base = CompletionConfig::constrained(0.0);
        let direct = complete(&obs, &base).unwrap().estimate;
        let out = dfc_proj(&obs, &DfcConfig::new(1, base)).unwrap();
        assert_eq!(out.estimate, direct);
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn projection_is_idempotent_and_rank_bounded() {
        let (_, obs) = instance(60, 48, 3, 0.4, 4);
        let cfg = DfcConfig {
            seed: 5,
            ..DfcConfig::new(3, CompletionConfig::penalized(0.5))
        };
        let out = dfc_proj(&obs, &cfg).unwrap();
        let ranks: Vec<usize> = out.diagnostics.iter().map(|d| d.rank).collect();
        assert!(out.estimate.rank() <= ranks[0]);
        let basis = out.estimate.u().clone();
        let again = project_onto_column_space(&out.estimate, &basis).unwrap();
        assert!(again.frobenius_distance(&out.estimate) <= 1e-8 * out.estimate.frobenius_norm().max(1.0));

        let ens = dfc_proj(&obs, &DfcConfig { ensemble: true, ..cfg }).unwrap();
        assert!(ens.estimate.rank() <= ranks.iter().sum());
        assert!(ens.estimate.orthonormality_error() <= 1e-8);
    }

    #[test]
    fn combine_matches_dense_oracle() {
        // L = C1 C1^+ [C1, .., Ct] formed densely with an explicit pseudoinverse
        let (_, obs) = instance(30, 24, 2, 0.7, 6);
        let cfg = DfcConfig {
            seed: 9,
            ..DfcConfig::new(2, CompletionConfig::penalized(0.3))
        };
        let out = dfc_proj(&obs, &cfg).unwrap();
        let part = partition_columns(&obs, 2, &RngStream::from_seed(9)).unwrap();
        let blocks: Vec<DMatrix<f64>> = part
            .blocks
            .iter()
            .map(|b| complete(&b.observed, &block_config(&cfg.base, b.observed.len(), obs.len(), 0)).unwrap())
            .map(|o| o.estimate.to_dense().unwrap())
            .collect();
        let c1 = &blocks[0];
        let proj = c1 * c1.clone().pseudo_inverse(1e-10 * c1.norm()).unwrap();
        let mut dense = DMatrix::zeros(30, 24);
        for (b, c) in part.blocks.iter().zip(&blocks) {
            let pc = &proj * c;
            for (q, &col) in b.columns.iter().enumerate() {
                dense.column_mut(col).copy_from(&pc.column(q));
            }
        }
        let got = out.estimate.to_dense().unwrap();
        assert!((got - &dense).norm() <= 1e-6 * dense.norm().max(1.0));
    }

    #[test]
    fn noiseless_ensemble_recovers() {
        let (l0, obs) = instance(120, 120, 3, 0.4, 7);
        let cfg = DfcConfig {
            ensemble: true,
            seed: 1,
            ..DfcConfig::new(3, CompletionConfig::constrained(0.0))
        };
        let out = dfc_proj(&obs, &cfg).unwrap();
        let err = (out.estimate.to_dense().unwrap() - &l0).norm() / l0.norm();
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn delta_is_split_by_observation_share() {
        let base = CompletionConfig::constrained(2.0);
        match block_config(&base, 25, 100, 0).mode {
            CompletionMode::Constrained { delta } => assert!((delta - 1.0).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn column_bound_arithmetic() {
        let l = theorem2_column_bound(200.0, 200.0, 1e4, 1.0, 5.0, 1.0, 1.0);
        let expect = 25.0 * 400.0 * 200.0 * 400f64.ln().powi(2) / 1e4;
        assert!((l - expect).abs() < 1e-9);
        assert!(l > 200.0);
        let half = theorem2_column_bound(200.0, 200.0, 2e4, 1.0, 5.0, 1.0, 1.0);
        assert!((half - l / 2.0).abs() < 1e-9);
    }
}
