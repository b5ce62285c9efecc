//! Noisy matrix completion via nuclear-norm minimisation, plus coherence
//! and sampling-bound diagnostics.

mod complete;
mod lowrank;
mod svd;

pub use complete::{complete, CompletionConfig, CompletionMode, CompletionOutput, StageTrace};
pub use lowrank::{LowRankEstimate, DENSE_LIMIT};
pub use svd::{partial_svd, svt, LinearOperator, PartialSvdOptions};

use crate::error::{Error, Result};

/// Subspace coherence of a factorisation: returns `(mu, r)` with
/// `mu = max((m/r) max_i ||U_i||^2, (n/r) max_j ||V_j||^2)`.
pub fn coherence(est: &LowRankEstimate) -> Result<(f64, usize)> {
    let r = est.rank();
    if r == 0 {
        return Err(Error::invalid("coherence of a rank-zero estimate is undefined"));
    }
    let lev = |f: &nalgebra::DMatrix<f64>| {
        f.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max)
    };
    let mu_u = est.nrows() as f64 / r as f64 * lev(est.u());
    let mu_v = est.ncols() as f64 / r as f64 * lev(est.v());
    Ok((mu_u.max(mu_v), r))
}

/// Number of uniformly sampled entries sufficient for recovery:
/// `32 mu r (m + n) ln^2(m + n)`.
/// Dimensions are taken as reals so the bound can be evaluated off-grid.
pub fn theorem1_sample_bound(m: f64, n: f64, mu: f64, r: f64) -> f64 {
    let mn = m + n;
    32.0 * mu * r * mn * mn.ln().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, StandardNormal};

    fn basis(m: usize, r: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, r, f)
    }

    #[test]
    fn spiky_basis_is_maximally_coherent() {
        let (m, n, r) = (12, 8, 2);
        let id = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let est = LowRankEstimate::new(basis(m, r, id), DVector::from_vec(vec![2.0, 1.0]), basis(n, r, id)).unwrap();
        let (mu, rank) = coherence(&est).unwrap();
        assert_eq!(rank, 2);
        assert!((mu - 12.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_basis_has_unit_coherence() {
        // Hadamard-type columns: every entry has magnitude 1/sqrt(m)
        let h = |m: usize| {
            move |i: usize, j: usize| {
                let sign = if (i & (j + 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                sign / (m as f64).sqrt()
            }
        };
        let u = basis(8, 2, h(8));
        assert!((u.tr_mul(&u) - DMatrix::identity(2, 2)).norm() < 1e-12);
        let est = LowRankEstimate::new(u.clone(), DVector::from_vec(vec![1.0, 1.0]), u).unwrap();
        let (mu, _) = coherence(&est).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_factors_match_leverage_oracle() {
        let mut rng = RngStream::from_seed(4).rng();
        let a = DMatrix::from_fn(200, 5, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let b = DMatrix::from_fn(200, 5, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let l = &a * b.transpose();
        let est = LowRankEstimate::from_factors(&a, &b, 1e-12).unwrap();
        let (mu, r) = coherence(&est).unwrap();
        // leverage scores from the hat matrix of the column and row spaces
        let hat = |x: &DMatrix<f64>| x * (x.tr_mul(x)).try_inverse().unwrap() * x.transpose();
        let hu = hat(&a);
        let hv = hat(&b);
        let lev = |h: &DMatrix<f64>| (0..h.nrows()).map(|i| h[(i, i)]).fold(0.0, f64::max);
        let oracle = (200.0 / 5.0 * lev(&hu)).max(200.0 / 5.0 * lev(&hv));
        assert_eq!(r, 5);
        assert!((mu - oracle).abs() < 1e-8, "{mu} vs {oracle}");
        assert!((1.0..=10.0).contains(&mu));
        assert!((est.to_dense().unwrap() - l).norm() < 1e-8);
    }

    #[test]
    fn rank_zero_coherence_is_an_error() {
        assert!(coherence(&LowRankEstimate::zero(3, 3)).is_err());
    }

    #[test]
    fn sample_bound_values() {
        // log term equals one when m + n = e
        let e = std::f64::consts::E;
        assert!((theorem1_sample_bound(e / 2.0, e / 2.0, 1.0, 1.0) - 32.0 * e).abs() < 1e-9);
        // at m = n = e the log term is (1 + ln 2)^2, not one
        let at_e = 64.0 * e * (1.0 + 2f64.ln()).powi(2);
        assert!((theorem1_sample_bound(e, e, 1.0, 1.0) - at_e).abs() < 1e-9);
        assert!((at_e - 498.728).abs() < 1e-3);
        let b = theorem1_sample_bound(200.0, 200.0, 1.0, 5.0);
        assert!((b - 32.0 * 5.0 * 400.0 * 400f64.ln().powi(2)).abs() < 1e-6);
        assert!((b / 2.2974e6 - 1.0).abs() < 1e-4);
        assert!(b > 200.0 * 200.0);
    }
}
