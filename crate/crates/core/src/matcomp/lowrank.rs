use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest `rows * cols` for which a dense reconstruction is allowed.
pub const DENSE_LIMIT: usize = 1_000_000;

/// A matrix in thin-SVD form `U diag(sigma) V^T`.
///
/// `U` and `V` have orthonormal columns; `sigma` is positive and sorted in
/// decreasing order. The dense product is only formed on request.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankEstimate {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

impl LowRankEstimate {
    pub fn new(u: DMatrix<f64>, sigma: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        let k = sigma.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(Error::invalid(format!(
                "factor shapes {}x{}, {}, {}x{} are inconsistent",
                u.nrows(),
                u.ncols(),
                k,
                v.nrows(),
                v.ncols()
            )));
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("singular values must be positive and finite"));
        }
        if sigma.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("singular values must be nonincreasing"));
        }
        Ok(LowRankEstimate { u, sigma, v })
    }

    pub fn zero(nrows: usize, ncols: usize) -> Self {
        LowRankEstimate {
            u: DMatrix::zeros(nrows, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(ncols, 0),
        }
    }

    /// Builds the thin SVD of `a * b^T` from arbitrary factors, dropping
    /// singular values at or below `rel_tol * sigma_max`.
    pub fn from_factors(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(Error::invalid("factor inner dimensions differ"));
        }
        let (m, n) = (a.nrows(), b.nrows());
        if a.ncols() == 0 {
            return Ok(LowRankEstimate::zero(m, n));
        }
        let qa = a.clone().qr();
        let qb = b.clone().qr();
        let core = qa.r() * qb.r().transpose();
        let (pu, s, pv) = sorted_svd(core)?;
        let u = qa.q() * pu;
        let v = qb.q() * pv;
        Ok(truncate(u, s, v, |s, smax| s > rel_tol * smax, usize::MAX))
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        (self.u, self.sigma, self.v)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.rank())
            .map(|l| self.u[(i, l)] * self.sigma[l] * self.v[(j, l)])
            .sum()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.norm()
    }

    /// `U diag(sigma)`, the scaled left factor.
    pub fn scaled_left(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (l, s) in self.sigma.iter().enumerate() {
            us.column_mut(l).scale_mut(*s);
        }
        us
    }

    /// Dense `U diag(sigma) V^T`; refused above [`DENSE_LIMIT`] entries.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.nrows() * self.ncols() > DENSE_LIMIT {
            return Err(Error::invalid(format!(
                "refusing to materialise a {}x{} matrix",
                self.nrows(),
                self.ncols()
            )));
        }
        Ok(self.dense_unchecked())
    }

    pub(crate) fn dense_unchecked(&self) -> DMatrix<f64> {
        if self.rank() == 0 {
            return DMatrix::zeros(self.nrows(), self.ncols());
        }
        self.scaled_left() * self.v.transpose()
    }

    /// Frobenius distance to another estimate, accumulated one row at a time.
    pub fn frobenius_distance(&self, other: &LowRankEstimate) -> f64 {
        assert_eq!((self.nrows(), self.ncols()), (other.nrows(), other.ncols()));
        let a = self.scaled_left();
        let b = other.scaled_left();
        let vt_a = self.v.transpose();
        let vt_b = other.v.transpose();
        let mut acc = 0.0;
        for i in 0..self.nrows() {
            let ra = a.row(i) * &vt_a;
            let rb = b.row(i) * &vt_b;
            acc += (ra - rb).norm_squared();
        }
        acc.sqrt()
    }

    /// Largest deviation of `U^T U` and `V^T V` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.rank();
        let eye = DMatrix::<f64>::identity(k, k);
        let eu = (self.u.transpose() * &self.u - &eye).amax();
        let ev = (self.v.transpose() * &self.v - &eye).amax();
        eu.max(ev)
    }

    /// Keeps the columns listed in `cols` (of the right factor), re-expressed
    /// as a thin SVD.
    pub fn select_columns(&self, cols: &[usize]) -> Result<LowRankEstimate> {
        let v_sub = DMatrix::from_fn(cols.len(), self.rank(), |r, l| self.v[(cols[r], l)]);
        LowRankEstimate::from_factors(&self.scaled_left(), &v_sub, 1e-12)
    }
}

/// SVD with singular values sorted in decreasing order.
pub(crate) fn sorted_svd(mat: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    crate::linalg::svd(&mat)
}

/// Keeps leading triplets whose value passes `keep(s, s_max)`, at most `cap`.
/// `s` is assumed sorted in decreasing order.
pub(crate) fn truncate(
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    keep: impl Fn(f64, f64) -> bool,
    cap: usize,
) -> LowRankEstimate {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let k = s.iter().take_while(|&&x| x > 0.0 && keep(x, smax)).count().min(cap);
    LowRankEstimate {
        u: u.columns(0, k).into_owned(),
        sigma: s.rows(0, k).into_owned(),
        v: v.columns(0, k).into_owned(),
    }
}
