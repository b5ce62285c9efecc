//! Singular value thresholding and a block power partial SVD for implicit
//! operators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::lowrank::{sorted_svd, truncate, LowRankEstimate};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Proximal operator of `tau * ||.||_*`: shrinks every singular value by
/// `tau` and drops the ones that reach zero.
pub fn svt(matrix: &DMatrix<f64>, tau: f64) -> Result<LowRankEstimate> {
    svt_capped(matrix, tau, usize::MAX)
}

pub(crate) fn svt_capped(matrix: &DMatrix<f64>, tau: f64, cap: usize) -> Result<LowRankEstimate> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("threshold {tau} must be nonnegative")));
    }
    let (u, s, v) = sorted_svd(matrix.clone())?;
    let shrunk = s.map(|x| (x - tau).max(0.0));
    Ok(truncate(u, shrunk, v, |_, _| true, cap))
}

/// A matrix known only through products with blocks of vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A * x` for an `ncols x b` block.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `A^T * y` for an `nrows x b` block.
    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(y)
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

#[derive(Clone, Debug)]
pub struct PartialSvdOptions {
    pub rank: usize,
    pub oversample: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PartialSvdOptions {
    fn default() -> Self {
        PartialSvdOptions {
            rank: 10,
            oversample: 10,
            tol: 1e-8,
            max_iters: 200,
        }
    }
}

/// Leading `opts.rank` singular triplets by block subspace iteration.
///
/// `warm` supplies starting right vectors (e.g. the previous iterate's `V`);
/// missing columns are filled with Gaussian noise from `rng`. Iteration
/// stops when the leading singular values change by less than `opts.tol`
/// relative to the largest.
pub fn partial_svd(
    op: &dyn LinearOperator,
    opts: &PartialSvdOptions,
    warm: Option<&DMatrix<f64>>,
    rng: &RngStream,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = (op.nrows(), op.ncols());
    let k = opts.rank.min(m).min(n);
    let block = (k + opts.oversample).min(m).min(n);
    let mut r = rng.rng();
    let mut start = DMatrix::<f64>::from_fn(n, block, |_, _| r.sample(StandardNormal));
    if let Some(w) = warm {
        let take = w.ncols().min(block);
        if w.nrows() == n {
            start.columns_mut(0, take).copy_from(&w.columns(0, take));
        }
    }
    let mut q = orthonormalize(op.apply(&orthonormalize(start)));
    let mut prev: Option<DVector<f64>> = None;
    for _ in 0..opts.max_iters.max(1) {
        let bt = op.apply_t(&q); // n x block, equals (Q^T A)^T
        let (w, s, z) = sorted_svd(bt.clone())?;
        let lead = s.rows(0, k).into_owned();
        let done = match &prev {
            Some(p) => {
                let scale = lead.get(0).copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
                (p - &lead).amax() <= opts.tol * scale
            }
            None => false,
        };
        if done {
            // A ~= Q B, B = (Bt)^T = Z S W^T
            let u = &q * z.columns(0, k);
            let v = w.columns(0, k).into_owned();
            return Ok((u, lead, v));
        }
        prev = Some(lead);
        q = orthonormalize(op.apply(&orthonormalize(bt)));
    }
    let bt = op.apply_t(&q);
    let (w, s, z) = sorted_svd(bt)?;
    Ok((&q * z.columns(0, k), s.rows(0, k).into_owned(), w.columns(0, k).into_owned()))
}
