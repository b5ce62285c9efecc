use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::elliptope::project_elliptope_descent;
use super::nnls::{nnls_columns, nnls_gram};
use super::nuclear::project_nuclear_descent;
use super::{check_dim, norm, ConvexBody};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeMethod {
    /// Use the body's exact cone where one is implemented.
    Exact,
    /// Always approximate by sampled boundary directions.
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeOptions {
    pub method: ConeMethod,
    /// Boundary points drawn for a sampled cone.
    pub n_gen: usize,
    pub nnls_tol: f64,
    pub nnls_max_iters: usize,
    /// Tolerance and budget of iterative cone projections.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
}

impl Default for ConeOptions {
    fn default() -> Self {
        ConeOptions {
            method: ConeMethod::Exact,
            n_gen: 512,
            nnls_tol: 1e-8,
            nnls_max_iters: 10_000,
            inner_tol: 1e-10,
            inner_max_iters: 20_000,
        }
    }
}

/// Generator count above which Gram entries are computed on demand.
pub const GRAM_LIMIT: usize = 4096;

/// Conic hull of finitely many generators.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeModel {
    pub apex: Vec<f64>,
    /// Unit-norm generators, one per column.
    pub generators: DMatrix<f64>,
    /// Precomputed `G^T G`; `None` above [`GRAM_LIMIT`] generators.
    gram: Option<DMatrix<f64>>,
    pub sampled: bool,
    nnls_tol: f64,
    nnls_max_iters: usize,
}

impl ConeModel {
    /// Zero generators are dropped, the rest normalised.
    pub fn new(apex: Vec<f64>, generators: Vec<Vec<f64>>, opts: &ConeOptions) -> Result<Self> {
        let p = apex.len();
        let floor = 1e-12 * norm(&apex).max(1.0);
        let mut flat = Vec::new();
        for g in &generators {
            check_dim(p, g)?;
            let n = norm(g);
            if n > floor {
                flat.extend(g.iter().map(|v| v / n));
            }
        }
        let k = flat.len() / p.max(1);
        let generators = DMatrix::from_vec(p, k, flat);
        let gram = (k <= GRAM_LIMIT).then(|| generators.tr_mul(&generators));
        Ok(ConeModel {
            apex,
            generators,
            gram,
            sampled: false,
            nnls_tol: opts.nnls_tol,
            nnls_max_iters: opts.nnls_max_iters,
        })
    }

    pub fn dim(&self) -> usize {
        self.apex.len()
    }

    pub fn generator_count(&self) -> usize {
        self.generators.ncols()
    }

    /// Projection of `z` onto the cone and whether the NNLS solve converged.
    pub fn project(&self, z: &[f64]) -> (Vec<f64>, bool) {
        if self.generator_count() == 0 {
            return (vec![0.0; self.dim()], true);
        }
        let z = DVector::from_column_slice(z);
        let sol = match &self.gram {
            Some(gram) => nnls_gram(gram, &self.generators.tr_mul(&z), self.nnls_tol, self.nnls_max_iters),
            None => nnls_columns(&self.generators, &z, self.nnls_tol, self.nnls_max_iters),
        };
        let point = &self.generators * sol.coefficients;
        (point.as_slice().to_vec(), sol.converged)
    }

    /// True when the generators positively span the whole space, checked by
    /// reaching every signed basis vector. Needs at least `p + 1` generators.
    pub fn spans_space(&self) -> bool {
        let p = self.dim();
        if self.generator_count() < p + 1 {
            return false;
        }
        (0..2 * p).all(|i| {
            let mut e = vec![0.0; p];
            e[i / 2] = if i % 2 == 0 { 1.0 } else { -1.0 };
            let (proj, ok) = self.project(&e);
            ok && proj.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= 1e-8
        })
    }

    pub fn into_cone(self) -> TangentCone {
        if self.generator_count() == 0 {
            TangentCone::Zero { dim: self.dim() }
        } else if self.spans_space() {
            TangentCone::FullSpace { dim: self.dim() }
        } else {
            TangentCone::Polyhedral(self)
        }
    }
}

/// A tangent cone together with a way to project onto it.
#[derive(Clone, Debug, PartialEq)]
pub enum TangentCone {
    FullSpace { dim: usize },
    Zero { dim: usize },
    /// Orthant-like cone: coordinate `i` is free (0), nonnegative (+1) or nonpositive (-1).
    Coordinate { signs: Vec<i8> },
    /// `{d : <normal, d> <= 0}`.
    Halfspace { normal: Vec<f64> },
    Polyhedral(ConeModel),
    /// Descent cone of the nuclear norm at a matrix with singular vectors `u, v`.
    NuclearDescent { u: DMatrix<f64>, v: DMatrix<f64> },
    /// Tangent cone of the elliptope; the last `null_dim` columns of `basis`
    /// span the kernel of the apex.
    ElliptopeDescent {
        basis: DMatrix<f64>,
        null_dim: usize,
        tol: f64,
        max_iters: usize,
    },
}

impl TangentCone {
    pub fn dim(&self) -> usize {
        match self {
            TangentCone::FullSpace { dim } | TangentCone::Zero { dim } => *dim,
            TangentCone::Coordinate { signs } => signs.len(),
            TangentCone::Halfspace { normal } => normal.len(),
            TangentCone::Polyhedral(m) => m.dim(),
            TangentCone::NuclearDescent { u, v } => u.nrows() * v.nrows(),
            TangentCone::ElliptopeDescent { basis, .. } => basis.nrows() * basis.nrows(),
        }
    }

    /// Short label for output metadata.
    pub fn kind(&self) -> &'static str {
        match self {
            TangentCone::FullSpace { .. } => "full-space",
            TangentCone::Zero { .. } => "zero",
            TangentCone::Coordinate { .. } => "coordinate",
            TangentCone::Halfspace { .. } => "halfspace",
            TangentCone::Polyhedral(m) if m.sampled => "sampled",
            TangentCone::Polyhedral(_) => "polyhedral",
            TangentCone::NuclearDescent { .. } => "nuclear-descent",
            TangentCone::ElliptopeDescent { .. } => "elliptope-descent",
        }
    }

    /// Euclidean projection of `z`, with a convergence flag for iterative cases.
    pub fn project(&self, z: &[f64]) -> Result<(Vec<f64>, bool)> {
        check_dim(self.dim(), z)?;
        Ok(match self {
            TangentCone::FullSpace { .. } => (z.to_vec(), true),
            TangentCone::Zero { dim } => (vec![0.0; *dim], true),
            TangentCone::Coordinate { signs } => (
                z.iter()
                    .zip(signs)
                    .map(|(&v, &s)| match s {
                        1 => v.max(0.0),
                        -1 => v.min(0.0),
                        _ => v,
                    })
                    .collect(),
                true,
            ),
            TangentCone::Halfspace { normal } => {
                let t = super::dot(normal, z).max(0.0);
                (z.iter().zip(normal).map(|(v, n)| v - t * n).collect(), true)
            }
            TangentCone::Polyhedral(m) => m.project(z),
            TangentCone::NuclearDescent { u, v } => (project_nuclear_descent(u, v, z)?, true),
            TangentCone::ElliptopeDescent {
                basis,
                null_dim,
                tol,
                max_iters,
            } => project_elliptope_descent(basis, *null_dim, z, *tol, *max_iters),
        })
    }
}

pub(crate) fn check_apex<B: ConvexBody + ?Sized>(body: &B, apex: &[f64]) -> Result<()> {
    check_dim(body.dim(), apex)?;
    if !body.contains(apex, 1e-6) {
        return Err(Error::invalid(format!("apex is not a point of the {}", body.name())));
    }
    Ok(())
}

/// Inner approximation of the tangent cone from `n_gen` directions
/// `P_C(apex + t u) - apex`, with `u` uniform on the sphere and `t`
/// log-uniform in `[1e-3, 1] * max(|apex|, 1)`. The approximation only
/// shrinks the cone, so complexities computed from it are lower bounds.
pub fn sampled_cone<B: ConvexBody + ?Sized>(
    body: &B,
    apex: &[f64],
    opts: &ConeOptions,
    rng: &RngStream,
) -> Result<TangentCone> {
    let p = body.dim();
    let base = norm(apex).max(1.0);
    let generators = (0..opts.n_gen)
        .into_par_iter()
        .map(|g| {
            let mut r = rng.derive(g as u64).rng();
            let u: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut r)).collect();
            let un = norm(&u);
            let scale = base * 10f64.powf(-3.0 * r.random::<f64>());
            let target: Vec<f64> = apex.iter().zip(&u).map(|(a, d)| a + scale * d / un).collect();
            let b = body.project(&target)?;
            Ok(b.point.iter().zip(apex).map(|(b, a)| b - a).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = ConeModel::new(apex.to_vec(), generators, opts)?;
    model.sampled = true;
    Ok(model.into_cone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Trials whose cone projection did not converge.
    pub dropped: usize,
}

/// Monte Carlo estimate of `E ||Pi_T(z)||^2` for standard normal `z`.
pub fn gaussian_sq_complexity(cone: &TangentCone, trials: usize, rng: &RngStream) -> Result<ComplexityEstimate> {
    if trials < 2 {
        return Err(Error::invalid("complexity estimation needs at least two trials"));
    }
    let p = cone.dim();
    let draws: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.derive(t as u64).rng();
            let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut r)).collect();
            let (proj, ok) = cone.project(&z)?;
            Ok(ok.then(|| proj.iter().map(|v| v * v).sum()))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = draws.iter().flatten().cloned().collect();
    let (mean, std_error) = mean_and_se(&kept)?;
    Ok(ComplexityEstimate {
        mean,
        std_error,
        trials: kept.len(),
        dropped: trials - kept.len(),
    })
}

pub(crate) fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::AllFailed {
            what: "Monte Carlo trial",
            detail: format!("only {n} usable trials"),
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Smallest `n` with `sigma^2 * complexity / n <= 1`.
pub fn sample_size_for_unit_risk(sigma: f64, complexity: f64) -> Result<u64> {
    if !(sigma > 0.0) || !(complexity >= 0.0) || !complexity.is_finite() {
        return Err(Error::invalid(format!(
            "need sigma > 0 and a finite nonnegative complexity, got {sigma}, {complexity}"
        )));
    }
    Ok((sigma * sigma * complexity).ceil() as u64)
}
