use nalgebra::{DMatrix, DVector};

use super::{check_dim, cone, ConeModel, ConeOptions, ConvexBody, Projection, TangentCone};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest vertex list the enumerating constructors will build.
pub const DEFAULT_VERTEX_CAP: usize = 1 << 16;

fn check_count(count: u128, cap: usize) -> Result<usize> {
    if count > cap as u128 {
        return Err(Error::InfeasibleScale { vertices: count, cap });
    }
    Ok(count as usize)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Cut matrices `a a^T`, `a in {-1, +1}^q` with `a_0 = +1`, flattened column-major.
pub fn cut_vertices(q: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    if q == 0 {
        return Err(Error::invalid("cut matrices need q >= 1"));
    }
    let count = check_count(1u128.checked_shl(q as u32 - 1).unwrap_or(u128::MAX), cap)?;
    Ok((0..count)
        .map(|mask| {
            let a: Vec<f64> = (0..q)
                .map(|i| if i > 0 && (mask >> (i - 1)) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            (0..q * q).map(|idx| a[idx % q] * a[idx / q]).collect()
        })
        .collect())
}

/// Symmetric placements of a `k x k` block with entries `q / k` in a `q x q`
/// matrix: one vertex per `k`-subset of the rows.
pub fn sparse_pca_vertices(q: usize, k: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 || k > q {
        return Err(Error::invalid(format!("block size {k} must be in [1, {q}]")));
    }
    check_count(binomial(q as u128, k as u128), cap)?;
    let value = q as f64 / k as f64;
    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let mut v = vec![0.0; q * q];
        for &i in &subset {
            for &j in &subset {
                v[j * q + i] = value;
            }
        }
        out.push(v);
        // next k-subset in lexicographic order
        let Some(pos) = (0..k).rev().find(|&i| subset[i] < q - k + i) else {
            break;
        };
        subset[pos] += 1;
        for i in pos + 1..k {
            subset[i] = subset[i - 1] + 1;
        }
    }
    Ok(out)
}

/// Convex hull of an explicit vertex list.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    /// One vertex per column.
    vertices: DMatrix<f64>,
    label: String,
    pub gap_tol: f64,
    pub max_iters: usize,
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let first = vertices.first().ok_or_else(|| Error::invalid("polytope needs at least one vertex"))?;
        let p = first.len();
        if p == 0 || vertices.iter().any(|v| v.len() != p) {
            return Err(Error::invalid("vertices must share a positive dimension"));
        }
        let flat: Vec<f64> = vertices.into_iter().flatten().collect();
        let k = flat.len() / p;
        Ok(Polytope {
            vertices: DMatrix::from_vec(p, k, flat),
            label: label.into(),
            gap_tol: 1e-6,
            max_iters: 100_000,
        })
    }

    pub fn cut(p: usize) -> Result<Self> {
        let q = super::matrix_side(p)?;
        Polytope::new(cut_vertices(q, DEFAULT_VERTEX_CAP)?, "cut-polytope")
    }

    pub fn sparse_pca(p: usize, k: usize) -> Result<Self> {
        let q = super::matrix_side(p)?;
        Polytope::new(sparse_pca_vertices(q, k, DEFAULT_VERTEX_CAP)?, "sparse-pca-hull")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.ncols()
    }

    pub fn vertex(&self, i: usize) -> Vec<f64> {
        self.vertices.column(i).iter().cloned().collect()
    }

    pub fn vertices(&self) -> &DMatrix<f64> {
        &self.vertices
    }

    fn project_with_tol(&self, x: &[f64], gap_tol: f64) -> Result<Projection> {
        check_dim(self.dim(), x)?;
        Ok(project_polytope(&self.vertices, x, gap_tol, self.max_iters))
    }
}

/// Nearest point of `conv(vertices)` to `y` by away-step Frank-Wolfe with
/// exact line search. Stops once the Frank-Wolfe duality gap is below `gap_tol`.
pub fn project_polytope(vertices: &DMatrix<f64>, y: &[f64], gap_tol: f64, max_iters: usize) -> Projection {
    let k = vertices.ncols();
    let yv = DVector::from_column_slice(y);
    let sq: Vec<f64> = vertices.column_iter().map(|c| c.norm_squared()).collect();
    // <v_i, y> for every vertex, reused for the gradient inner products
    let vy = vertices.tr_mul(&yv);
    let start = (0..k)
        .min_by(|&a, &b| (sq[a] - 2.0 * vy[a]).total_cmp(&(sq[b] - 2.0 * vy[b])))
        .unwrap();
    let mut weights = vec![0.0; k];
    weights[start] = 1.0;
    let mut active = vec![start];
    let mut x: DVector<f64> = vertices.column(start).into_owned();
    let mut gap = f64::INFINITY;
    for it in 0..max_iters {
        let g = &x - &yv;
        let vg = vertices.tr_mul(&g);
        let xg = x.dot(&g);
        let s = vg.imin();
        gap = xg - vg[s];
        if gap <= gap_tol {
            return Projection {
                point: x.as_slice().to_vec(),
                converged: true,
                achieved_tol: gap.max(0.0),
                iterations: it,
            };
        }
        let a = *active
            .iter()
            .max_by(|&&i, &&j| vg[i].total_cmp(&vg[j]))
            .unwrap();
        let away_gap = vg[a] - xg;
        let (dir, gamma_max, fw) = if gap >= away_gap {
            (vertices.column(s) - &x, 1.0, true)
        } else {
            let wa = weights[a];
            (&x - vertices.column(a), wa / (1.0 - wa), false)
        };
        let dd = dir.norm_squared();
        if dd == 0.0 {
            break;
        }
        let gamma = (-g.dot(&dir) / dd).clamp(0.0, gamma_max);
        x += &dir * gamma;
        if fw {
            weights.iter_mut().for_each(|w| *w *= 1.0 - gamma);
            weights[s] += gamma;
            if gamma == 1.0 {
                weights.iter_mut().for_each(|w| *w = 0.0);
                weights[s] = 1.0;
            }
        } else {
            weights.iter_mut().for_each(|w| *w *= 1.0 + gamma);
            weights[a] -= gamma;
            if gamma == gamma_max {
                weights[a] = 0.0;
            }
        }
        active.retain(|&i| weights[i] > 0.0);
        if weights[s] > 0.0 && !active.contains(&s) {
            active.push(s);
        }
    }
    Projection {
        point: x.as_slice().to_vec(),
        converged: false,
        achieved_tol: gap,
        iterations: max_iters,
    }
}

impl ConvexBody for Polytope {
    fn dim(&self) -> usize {
        self.vertices.nrows()
    }

    fn name(&self) -> String {
        self.label.clone()
    }

    fn project(&self, x: &[f64]) -> Result<Projection> {
        self.project_with_tol(x, self.gap_tol)
    }

    fn linear_max(&self, direction: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), direction)?;
        let scores = self.vertices.tr_mul(&DVector::from_column_slice(direction));
        Ok(self.vertex(scores.imax()))
    }

    /// Membership up to Euclidean distance `tol`, via a projection whose
    /// gap certificate bounds the distance.
    fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let Ok(p) = self.project_with_tol(x, 0.125 * tol * tol) else {
            return false;
        };
        let d: f64 = p.point.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        d <= tol
    }

    fn tangent_cone(&self, apex: &[f64], opts: &ConeOptions, _rng: &RngStream) -> Result<TangentCone> {
        cone::check_apex(self, apex)?;
        let generators: Vec<Vec<f64>> = (0..self.vertex_count())
            .map(|i| self.vertex(i).iter().zip(apex).map(|(v, a)| v - a).collect())
            .collect();
        Ok(ConeModel::new(apex.to_vec(), generators, opts)?.into_cone())
    }
}
