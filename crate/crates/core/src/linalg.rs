//! Dense SVD with a reconstruction check.
//!
//! nalgebra's bidiagonal SVD occasionally returns an inaccurate
//! factorisation for rank-deficient inputs. Every decomposition here is
//! verified and recomputed on the transpose, then by one-sided Jacobi, when
//! the check fails.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RECONSTRUCTION_TOL: f64 = 1e-11;

type Triplet = (DMatrix<f64>, DVector<f64>, DMatrix<f64>);

fn residual(m: &DMatrix<f64>, (u, s, v): &Triplet) -> f64 {
    let us = DMatrix::from_fn(u.nrows(), s.len(), |i, l| u[(i, l)] * s[l]);
    (us * v.transpose() - m).norm()
}

fn nalgebra_svd(m: &DMatrix<f64>) -> Option<Triplet> {
    let svd = m.clone().try_svd(true, true, f64::EPSILON, 10_000)?;
    Some((svd.u?, svd.singular_values, svd.v_t?.transpose()))
}

/// Fills columns of `q` listed in `zero` with unit vectors orthogonal to
/// every other column.
fn complete_basis(q: &mut DMatrix<f64>, zero: &[usize]) {
    let m = q.nrows();
    for &c in zero {
        let mut best = DVector::zeros(m);
        let mut best_norm = 0.0;
        for k in 0..m {
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            for j in 0..q.ncols() {
                if j != c {
                    let proj = q.column(j).dot(&e);
                    e -= q.column(j) * proj;
                }
            }
            let n = e.norm();
            if n > best_norm {
                best_norm = n;
                best = e / n;
            }
        }
        q.column_mut(c).copy_from(&best);
    }
}

/// One-sided Jacobi SVD for `m >= n`.
fn jacobi_svd(a: &DMatrix<f64>) -> Result<Triplet> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = u.column(i).norm_squared();
                let beta = u.column(j).norm_squared();
                let gamma = u.column(i).dot(&u.column(j));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            let sigma = DVector::from_iterator(n, u.column_iter().map(|c| c.norm()));
            let smax = sigma.max();
            let mut zero = Vec::new();
            for l in 0..n {
                if sigma[l] > f64::EPSILON * smax.max(f64::MIN_POSITIVE) * n as f64 {
                    let inv = 1.0 / sigma[l];
                    u.column_mut(l).scale_mut(inv);
                } else {
                    zero.push(l);
                }
            }
            complete_basis(&mut u, &zero);
            return Ok((u, sigma, v));
        }
    }
    Err(Error::numerical("Jacobi SVD did not converge"))
}

/// Thin SVD `m = U diag(s) V^T` with `s` in decreasing order.
pub fn svd(m: &DMatrix<f64>) -> Result<Triplet> {
    let scale = m.norm();
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if scale == 0.0 || k == 0 {
        let mut u = DMatrix::zeros(rows, k);
        let mut v = DMatrix::zeros(cols, k);
        for l in 0..k {
            u[(l, l)] = 1.0;
            v[(l, l)] = 1.0;
        }
        return Ok((u, DVector::zeros(k), v));
    }
    let tol = RECONSTRUCTION_TOL * scale.max(1.0);
    let out = match nalgebra_svd(m).filter(|t| residual(m, t) <= tol) {
        Some(t) => t,
        None => match nalgebra_svd(&m.transpose()).map(|(u, s, v)| (v, s, u)).filter(|t| residual(m, t) <= tol) {
            Some(t) => t,
            None if rows >= cols => jacobi_svd(m)?,
            None => {
                let (u, s, v) = jacobi_svd(&m.transpose())?;
                (v, s, u)
            }
        },
    };
    Ok(sort_desc(out))
}

fn sort_desc((u, s, v): Triplet) -> Triplet {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    (
        u.select_columns(&order),
        DVector::from_iterator(order.len(), order.iter().map(|&l| s[l])),
        v.select_columns(&order),
    )
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(svd(m)?.1)
}
