use rand::Rng;

use super::{matrix_side, sparse_pca_vertices, cut_vertices, Polytope, DEFAULT_VERTEX_CAP};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// The two finite signal families: sparse-PCA block matrices and cut matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalSpec {
    /// `k x k` block of value `sqrt(p)/k` on a symmetric set of rows and columns.
    SparsePca { p: usize, k: usize },
    /// `a a^T` for sign vectors `a`.
    CutMatrix { p: usize },
}

impl SignalSpec {
    pub fn p(&self) -> usize {
        match *self {
            SignalSpec::SparsePca { p, .. } | SignalSpec::CutMatrix { p } => p,
        }
    }

    pub fn side(&self) -> Result<usize> {
        let q = matrix_side(self.p())?;
        if let SignalSpec::SparsePca { k, .. } = *self {
            if k == 0 || k > q {
                return Err(Error::invalid(format!("block size {k} must be in [1, {q}]")));
            }
        }
        Ok(q)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SignalSpec::SparsePca { .. } => "sparse-pca",
            SignalSpec::CutMatrix { .. } => "cut-matrix",
        }
    }

    /// Every signal of the family, or an infeasible-scale error past `cap`.
    pub fn signals(&self, cap: usize) -> Result<Vec<Vec<f64>>> {
        let q = self.side()?;
        match *self {
            SignalSpec::SparsePca { k, .. } => sparse_pca_vertices(q, k, cap),
            SignalSpec::CutMatrix { .. } => cut_vertices(q, cap),
        }
    }

    /// Convex hull of the signal set.
    pub fn hull(&self) -> Result<Polytope> {
        let label = match self {
            SignalSpec::SparsePca { .. } => "sparse-pca-hull",
            SignalSpec::CutMatrix { .. } => "cut-polytope",
        };
        Polytope::new(self.signals(DEFAULT_VERTEX_CAP)?, label)
    }

    /// One signal drawn uniformly, built directly so that it works past the
    /// enumeration cap.
    pub fn sample(&self, rng: &RngStream) -> Result<Vec<f64>> {
        let q = self.side()?;
        let mut r = rng.rng();
        let mut x = vec![0.0; q * q];
        match *self {
            SignalSpec::SparsePca { k, .. } => {
                let rows = rand::seq::index::sample(&mut r, q, k).into_vec();
                let value = q as f64 / k as f64;
                for &i in &rows {
                    for &j in &rows {
                        x[j * q + i] = value;
                    }
                }
            }
            SignalSpec::CutMatrix { .. } => {
                let a: Vec<f64> = (0..q).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
                for i in 0..q {
                    for j in 0..q {
                        x[j * q + i] = a[i] * a[j];
                    }
                }
            }
        }
        Ok(x)
    }
}
