//! Shrinkage estimation by projection onto convex bodies, tangent cones and
//! Gaussian squared-complexity.
//!
//! Points are flat vectors. Matrix-valued bodies read them as square
//! matrices in column-major order.

mod bodies;
mod cone;
mod elliptope;
mod nnls;
mod nuclear;
mod polytope;
mod risk;
mod signals;

pub use bodies::{BoxBody, FullSpace, L2Ball, Singleton};
pub use cone::{
    gaussian_sq_complexity, sample_size_for_unit_risk, sampled_cone, ComplexityEstimate, ConeMethod, ConeModel,
    ConeOptions, TangentCone,
};
pub use elliptope::{project_elliptope, Elliptope};
pub use nnls::{nnls_columns, nnls_gram, NnlsSolution};
pub use nuclear::{project_nuclear_ball, NuclearBall};
pub use polytope::{cut_vertices, project_polytope, sparse_pca_vertices, Polytope, DEFAULT_VERTEX_CAP};
pub use risk::{risk_mc, shrink, DenoiseProblem, RiskEstimate};
pub use signals::SignalSpec;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::rng::RngStream;

/// Outcome of a projection. Iterative projections report whether they met
/// their tolerance rather than failing.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub converged: bool,
    pub achieved_tol: f64,
    pub iterations: usize,
}

impl Projection {
    pub(crate) fn exact(point: Vec<f64>) -> Self {
        Projection {
            point,
            converged: true,
            achieved_tol: 0.0,
            iterations: 0,
        }
    }
}

pub trait ConvexBody: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    /// Euclidean projection onto the body.
    fn project(&self, x: &[f64]) -> Result<Projection>;

    /// A point of the body maximising `<direction, x>`.
    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>>;

    fn contains(&self, x: &[f64], tol: f64) -> bool;

    /// Tangent cone at `apex`. The default samples boundary directions.
    fn tangent_cone(&self, apex: &[f64], opts: &ConeOptions, rng: &RngStream) -> Result<TangentCone> {
        cone::check_apex(self, apex)?;
        sampled_cone(self, apex, opts, rng)
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(crate::error::Error::invalid(format!(
            "expected a point of dimension {expected}, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Side length of a square matrix stored as a flat vector of length `p`.
pub fn matrix_side(p: usize) -> Result<usize> {
    let q = (p as f64).sqrt().round() as usize;
    if q * q != p || q == 0 {
        return Err(crate::error::Error::invalid(format!("dimension {p} is not a perfect square")));
    }
    Ok(q)
}

pub(crate) fn as_matrix(x: &[f64], q: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(q, q, x)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
