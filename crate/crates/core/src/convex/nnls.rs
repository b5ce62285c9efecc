//! Lawson-Hanson active-set nonnegative least squares in Gram form.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    pub coefficients: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// What the active-set iteration needs from `G`: the gradient `G^T (z - G c)`
/// and Gram entries on a passive set.
trait GramAccess {
    fn len(&self) -> usize;
    fn rhs(&self, i: usize) -> f64;
    fn rhs_amax(&self) -> f64;
    fn gradient(&self, c: &DVector<f64>) -> DVector<f64>;
    fn block(&self, idx: &[usize]) -> DMatrix<f64>;
}

struct Precomputed<'a> {
    gram: &'a DMatrix<f64>,
    rhs: &'a DVector<f64>,
}

impl GramAccess for Precomputed<'_> {
    fn len(&self) -> usize {
        self.rhs.len()
    }
    fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }
    fn rhs_amax(&self) -> f64 {
        self.rhs.amax()
    }
    fn gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        self.rhs - self.gram * c
    }
    fn block(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.gram[(idx[i], idx[j])])
    }
}

/// Gram entries computed from the columns on demand, for generator sets
/// whose full Gram matrix would not fit in memory.
struct Columns<'a> {
    g: &'a DMatrix<f64>,
    z: &'a DVector<f64>,
    rhs: DVector<f64>,
}

impl GramAccess for Columns<'_> {
    fn len(&self) -> usize {
        self.rhs.len()
    }
    fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }
    fn rhs_amax(&self) -> f64 {
        self.rhs.amax()
    }
    fn gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut fit = DVector::zeros(self.g.nrows());
        for (j, &cj) in c.iter().enumerate() {
            if cj != 0.0 {
                fit.axpy(cj, &self.g.column(j), 1.0);
            }
        }
        self.g.tr_mul(&(self.z - fit))
    }
    fn block(&self, idx: &[usize]) -> DMatrix<f64> {
        let sub = self.g.select_columns(idx);
        sub.tr_mul(&sub)
    }
}

fn solve_passive(acc: &dyn GramAccess, passive: &[usize]) -> DVector<f64> {
    let k = passive.len();
    let a = acc.block(passive);
    let b = DVector::from_fn(k, |i, _| acc.rhs(passive[i]));
    if let Some(ch) = a.clone().cholesky() {
        return ch.solve(&b);
    }
    // nearly dependent generators: fall back to a lightly regularised solve
    let ridge = 1e-12 * a.trace().max(1.0);
    let reg = &a + DMatrix::identity(k, k) * ridge;
    match reg.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => reg.svd(true, true).solve(&b, 1e-14).unwrap_or_else(|_| DVector::zeros(k)),
    }
}

/// Minimises `||G c - z||^2` over `c >= 0` given `gram = G^T G` and
/// `rhs = G^T z`. Stops when every inactive gradient entry is at most
/// `tol * max(1, |rhs|_inf)`.
pub fn nnls_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>, tol: f64, max_iters: usize) -> NnlsSolution {
    active_set(&Precomputed { gram, rhs }, tol, max_iters)
}

/// As [`nnls_gram`] for `||G c - z||^2` without forming `G^T G`.
pub fn nnls_columns(g: &DMatrix<f64>, z: &DVector<f64>, tol: f64, max_iters: usize) -> NnlsSolution {
    active_set(&Columns { g, z, rhs: g.tr_mul(z) }, tol, max_iters)
}

fn active_set(acc: &dyn GramAccess, tol: f64, max_iters: usize) -> NnlsSolution {
    let k = acc.len();
    let scale = tol * acc.rhs_amax().max(1.0);
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let mut iterations = 0;
    loop {
        let w = acc.gradient(&x);
        let next = (0..k)
            .filter(|&j| !passive[j] && w[j] > scale)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = next else {
            return NnlsSolution {
                coefficients: x,
                converged: true,
                iterations,
            };
        };
        if iterations >= max_iters {
            return NnlsSolution {
                coefficients: x,
                converged: false,
                iterations,
            };
        }
        passive[j] = true;
        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let s = solve_passive(acc, &idx);
            if s.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (a, &i) in idx.iter().enumerate() {
                    x[i] = s[a];
                }
                break;
            }
            // step back towards x until the first passive coefficient hits zero
            let mut alpha = f64::INFINITY;
            for (a, &i) in idx.iter().enumerate() {
                if s[a] <= 0.0 {
                    let denom = x[i] - s[a];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (a, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s[a] - x[i]);
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if idx.iter().all(|&i| !passive[i]) || iterations >= max_iters {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_of(g: &DMatrix<f64>, z: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        (g.tr_mul(g), g.tr_mul(z))
    }

    #[test]
    fn orthant_projection_is_positive_part() {
        let g = DMatrix::identity(3, 3);
        let z = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let (a, b) = gram_of(&g, &z);
        let sol = nnls_gram(&a, &b, 1e-12, 100);
        assert!(sol.converged);
        assert_eq!(sol.coefficients.as_slice(), &[1.5, 0.0, 0.25]);
    }

    #[test]
    fn matches_brute_force_over_supports() {
        // 2-d cone spanned by three generators; enumerate every support
        let g = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 1.0, 1.0, -1.0, 0.5]);
        for &(zx, zy) in &[(0.3, -2.0), (-1.0, -1.0), (2.0, 5.0), (-3.0, 0.2)] {
            let z = DVector::from_vec(vec![zx, zy]);
            let (a, b) = gram_of(&g, &z);
            let sol = nnls_gram(&a, &b, 1e-12, 100);
            let got = (&g * &sol.coefficients - &z).norm();
            let mut best = z.norm();
            for mask in 1u32..8 {
                let cols: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
                let sub = g.select_columns(&cols);
                if let Ok(c) = sub.clone().svd(true, true).solve(&z, 1e-14) {
                    if c.iter().all(|&v| v >= -1e-12) {
                        best = best.min((&sub * c - &z).norm());
                    }
                }
            }
            assert!((got - best).abs() < 1e-10, "{got} vs {best}");
            let cols = nnls_columns(&g, &z, 1e-12, 100);
            assert!((&cols.coefficients - &sol.coefficients).amax() < 1e-12);
        }
    }
}
