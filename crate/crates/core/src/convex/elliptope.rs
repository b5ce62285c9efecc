use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::{as_matrix, check_dim, cone, symmetrize, ConeMethod, ConeOptions, ConvexBody, Projection, TangentCone};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub(crate) fn psd_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&clipped) * v.transpose()
}

/// Nearest correlation matrix (unit diagonal, positive semidefinite) by
/// Dykstra-corrected alternating projections. The input is symmetrised
/// first, which does not change the nearest point.
pub fn project_elliptope(x: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<Projection> {
    if !x.is_square() {
        return Err(Error::invalid("elliptope projection needs a square matrix"));
    }
    let q = x.nrows();
    let mut y = symmetrize(x);
    let mut correction = DMatrix::zeros(q, q);
    let mut gap = f64::INFINITY;
    for it in 1..=max_iters {
        let r = &y - &correction;
        let psd = psd_part(&r);
        correction = &psd - &r;
        let mut next = psd.clone();
        next.fill_diagonal(1.0);
        gap = (&next - &psd).norm();
        let step = (&next - &y).norm();
        y = next;
        if gap.max(step) <= tol {
            return Ok(Projection {
                point: y.as_slice().to_vec(),
                converged: true,
                achieved_tol: gap.max(step),
                iterations: it,
            });
        }
    }
    Ok(Projection {
        point: y.as_slice().to_vec(),
        converged: false,
        achieved_tol: gap,
        iterations: max_iters,
    })
}

/// `q x q` correlation matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Elliptope {
    pub q: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Seeds the starting point of the linear maximisation.
    pub seed: u64,
}

impl Elliptope {
    pub fn new(q: usize) -> Self {
        Elliptope {
            q,
            tol: 1e-8,
            max_iters: 10_000,
            seed: 0,
        }
    }
}

impl ConvexBody for Elliptope {
    fn dim(&self) -> usize {
        self.q * self.q
    }

    fn name(&self) -> String {
        "elliptope".into()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.dim(), x)?;
        project_elliptope(&as_matrix(x, self.q), self.tol, self.max_iters)
    }

    /// Low-rank coordinate ascent over unit-vector factorisations `V V^T`.
    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), direction)?;
        let q = self.q;
        let c = symmetrize(&as_matrix(direction, q));
        let k = ((2.0 * q as f64).sqrt().ceil() as usize + 1).min(q);
        let mut rng = RngStream::new(self.seed, 0x656c_6c69).rng();
        let mut v = DMatrix::from_fn(q, k, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        for mut row in v.row_iter_mut() {
            let n = row.norm();
            row /= n;
        }
        let mut value = (&v.transpose() * &c * &v).trace();
        for _ in 0..self.max_iters {
            for i in 0..q {
                let mut g = c.row(i) * &v;
                g -= v.row(i) * c[(i, i)];
                let n = g.norm();
                if n > 0.0 {
                    v.row_mut(i).copy_from(&(g / n));
                }
            }
            let next = (&v.transpose() * &c * &v).trace();
            let done = (next - value).abs() <= 1e-12 * value.abs().max(1.0);
            value = next;
            if done {
                break;
            }
        }
        Ok((&v * v.transpose()).as_slice().to_vec())
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let m = as_matrix(x, self.q);
        if (&m - m.transpose()).amax() > tol {
            return false;
        }
        if (0..self.q).any(|i| (m[(i, i)] - 1.0).abs() > tol) {
            return false;
        }
        SymmetricEigen::new(symmetrize(&m)).eigenvalues.min() >= -tol
    }

    fn tangent_cone(&self, apex: &[f64], opts: &ConeOptions, rng: &RngStream) -> Result<TangentCone> {
        cone::check_apex(self, apex)?;
        if opts.method == ConeMethod::Sampled {
            return cone::sampled_cone(self, apex, opts, rng);
        }
        let eig = SymmetricEigen::new(symmetrize(&as_matrix(apex, self.q)));
        let lmax = eig.eigenvalues.max();
        let mut order: Vec<usize> = (0..self.q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let null_dim = order.iter().filter(|&&i| eig.eigenvalues[i] <= 1e-9 * lmax).count();
        let basis = eig.eigenvectors.select_columns(&order);
        Ok(TangentCone::ElliptopeDescent {
            basis,
            null_dim,
            tol: opts.inner_tol,
            max_iters: opts.inner_max_iters,
        })
    }
}

/// Projection onto `{D symmetric : diag D = 0, N^T D N >= 0}` where `N` spans
/// the last `null_dim` columns of the orthogonal `basis`: the tangent cone of
/// the elliptope at a point whose kernel is `span N`.
pub(crate) fn project_elliptope_descent(
    basis: &DMatrix<f64>,
    null_dim: usize,
    z: &[f64],
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, bool) {
    let q = basis.nrows();
    let start = q - null_dim;
    let onto_cone = |r: &DMatrix<f64>| {
        if null_dim == 0 {
            return r.clone();
        }
        let mut m = basis.transpose() * r * basis;
        let block = m.view((start, start), (null_dim, null_dim)).into_owned();
        m.view_mut((start, start), (null_dim, null_dim)).copy_from(&psd_part(&block));
        basis * m * basis.transpose()
    };
    let zs = symmetrize(&as_matrix(z, q));
    let scale = zs.norm().max(1e-300);
    let mut y = zs;
    y.fill_diagonal(0.0);
    let mut correction = DMatrix::zeros(q, q);
    for _ in 0..max_iters {
        let r = &y - &correction;
        let k = onto_cone(&r);
        correction = &k - &r;
        let mut next = k.clone();
        next.fill_diagonal(0.0);
        let gap = (&next - &k).norm();
        let step = (&next - &y).norm();
        y = next;
        if gap.max(step) <= tol * scale {
            return (y.as_slice().to_vec(), true);
        }
    }
    (y.as_slice().to_vec(), false)
}
