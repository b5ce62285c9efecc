use nalgebra::{DMatrix, DVector};

use super::{as_matrix, check_dim, cone, ConeMethod, ConeOptions, ConvexBody, Projection, TangentCone};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngStream;

/// Euclidean projection of `v >= 0` onto `{s >= 0, sum s <= radius}`.
pub(crate) fn project_capped_simplex(v: &[f64], radius: f64) -> Vec<f64> {
    let pos: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if pos.iter().sum::<f64>() <= radius {
        return pos;
    }
    let mut sorted = pos.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - radius) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    pos.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Nearest matrix with nuclear norm at most `radius`.
pub fn project_nuclear_ball(x: &DMatrix<f64>, radius: f64) -> Result<DMatrix<f64>> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("radius {radius} must be positive")));
    }
    let (u, s, v) = linalg::svd(x)?;
    let s = project_capped_simplex(s.as_slice(), radius);
    Ok(u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose())
}

/// Nuclear-norm ball over `q x q` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct NuclearBall {
    pub q: usize,
    pub radius: f64,
}

impl NuclearBall {
    pub fn new(q: usize, radius: f64) -> Result<Self> {
        if q == 0 || !(radius > 0.0) {
            return Err(Error::invalid("nuclear ball needs q >= 1 and a positive radius"));
        }
        Ok(NuclearBall { q, radius })
    }

    /// The ball of radius `sqrt(p)` containing every cut and sparse-PCA signal.
    pub fn for_signals(p: usize) -> Result<Self> {
        let q = super::matrix_side(p)?;
        NuclearBall::new(q, q as f64)
    }
}

impl ConvexBody for NuclearBall {
    fn dim(&self) -> usize {
        self.q * self.q
    }

    fn name(&self) -> String {
        "nuclear-ball".into()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        check_dim(self.dim(), x)?;
        let out = project_nuclear_ball(&as_matrix(x, self.q), self.radius)?;
        Ok(Projection::exact(out.as_slice().to_vec()))
    }

    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), direction)?;
        let (u, _, v) = linalg::svd(&as_matrix(direction, self.q))?;
        let top = u.column(0) * v.column(0).transpose() * self.radius;
        Ok(top.as_slice().to_vec())
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && linalg::singular_values(&as_matrix(x, self.q))
                .map(|s| s.sum() <= self.radius + tol * self.radius.max(1.0))
                .unwrap_or(false)
    }

    fn tangent_cone(&self, apex: &[f64], opts: &ConeOptions, rng: &RngStream) -> Result<TangentCone> {
        cone::check_apex(self, apex)?;
        if opts.method == ConeMethod::Sampled {
            return cone::sampled_cone(self, apex, opts, rng);
        }
        let m = as_matrix(apex, self.q);
        let (u, s, v) = linalg::svd(&m)?;
        if s.sum() < self.radius * (1.0 - 1e-10) {
            return Ok(TangentCone::FullSpace { dim: self.dim() });
        }
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 1e-9 * s[0]).collect();
        let u = u.select_columns(&keep);
        let v = v.select_columns(&keep);
        Ok(TangentCone::NuclearDescent { u, v })
    }
}

/// Projection onto `{D : <U V^T, D> + ||P_U^perp D P_V^perp||_* <= 0}`, the
/// descent cone of the nuclear norm at a matrix with singular vectors `U, V`.
/// Computed through the polar cone `{t (U V^T + W) : t >= 0, ||W||_op <= 1}`.
pub(crate) fn project_nuclear_descent(u: &DMatrix<f64>, v: &DMatrix<f64>, z: &[f64]) -> Result<Vec<f64>> {
    let q = u.nrows();
    let zm = as_matrix(z, q);
    let r = u.ncols() as f64;
    let pu = DMatrix::identity(q, q) - u * u.transpose();
    let pv = DMatrix::identity(q, q) - v * v.transpose();
    let z_perp = &pu * &zm * &pv;
    let uv = u * v.transpose();
    let c = zm.dot(&uv);
    let (su, ss, sv) = linalg::svd(&z_perp)?;
    let sig: Vec<f64> = ss.iter().cloned().collect();
    let excess = |t: f64| sig.iter().map(|s| (s - t).max(0.0).powi(2)).sum::<f64>();
    let objective = |t: f64| -2.0 * t * c + t * t * r + excess(t);
    let mut best_t = 0.0;
    let mut best = objective(0.0);
    let mut cum = 0.0;
    for k in 0..=sig.len() {
        if k > 0 {
            cum += sig[k - 1];
        }
        let t = ((c + cum) / (r + k as f64)).max(0.0);
        let f = objective(t);
        if f < best {
            best = f;
            best_t = t;
        }
    }
    let t = best_t;
    let clipped = DVector::from_iterator(ss.len(), ss.iter().map(|s| s.min(t)));
    let normal = uv * t + su * DMatrix::from_diagonal(&clipped) * sv.transpose();
    Ok((zm - normal).as_slice().to_vec())
}

