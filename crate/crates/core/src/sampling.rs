//! Sampling primitives: row subsamples, resampling weights, and uniformly
//! random observation patterns. Every function is a pure function of its
//! arguments and the supplied [`RngStream`].

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `m` distinct row indices of `data`, uniform over size-`m` subsets.
pub fn subsample(data: &Dataset, m: usize, rng: &RngStream) -> Result<Vec<usize>> {
    subsample_indices(data.n(), m, false, rng)
}

/// Draws `m` indices from `0..n`.
///
/// Without replacement the result is sorted and distinct. With replacement
/// the draws are returned in order and may repeat.
pub fn subsample_indices(
    n: usize,
    m: usize,
    with_replacement: bool,
    rng: &RngStream,
) -> Result<Vec<usize>> {
    if m == 0 || (!with_replacement && m > n) || n == 0 {
        return Err(Error::invalid(format!(
            "subsample size {m} out of range for {n} rows"
        )));
    }
    let mut r = rng.rng();
    if with_replacement {
        return Ok((0..m).map(|_| r.random_range(0..n)).collect());
    }
    let mut idx = rand::seq::index::sample(&mut r, n, m).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Multinomial(nominal; 1/m, ..., 1/m) counts, returned as reals.
///
/// Drawn as a chain of conditional binomials, so the cost is `O(m)`
/// regardless of `nominal`.
pub fn multinomial_weights(m: usize, nominal: usize, rng: &RngStream) -> Result<Vec<f64>> {
    if m == 0 || nominal == 0 {
        return Err(Error::invalid("multinomial weights need m >= 1 and nominal >= 1"));
    }
    let mut r = rng.rng();
    let mut remaining = nominal as u64;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let cells_left = (m - i) as u64;
        let draw = if cells_left == 1 {
            remaining
        } else if remaining == 0 {
            0
        } else {
            let b = Binomial::new(remaining, 1.0 / cells_left as f64)
                .map_err(|e| Error::numerical(e.to_string()))?;
            b.sample(&mut r)
        };
        remaining -= draw;
        out.push(draw as f64);
    }
    Ok(out)
}

/// `m` independent Poisson(nominal / m) counts.
pub fn poisson_weights(m: usize, nominal: usize, rng: &RngStream) -> Result<Vec<f64>> {
    if m == 0 || nominal == 0 {
        return Err(Error::invalid("poisson weights need m >= 1 and nominal >= 1"));
    }
    let rate = nominal as f64 / m as f64;
    let dist = Poisson::new(rate).map_err(|e| Error::numerical(e.to_string()))?;
    let mut r = rng.rng();
    Ok((0..m).map(|_| dist.sample(&mut r)).collect())
}

/// `s` distinct cells of an `m x n` grid, uniform over all size-`s` subsets.
///
/// Partial Fisher-Yates over the virtual row-major linearisation; displaced
/// positions live in a hash map, so memory is `O(s)`.
pub fn sample_omega(m: usize, n: usize, s: usize, rng: &RngStream) -> Result<Vec<(usize, usize)>> {
    let total = (m as u64)
        .checked_mul(n as u64)
        .ok_or_else(|| Error::invalid("grid size overflows u64"))?;
    if s == 0 || s as u64 > total {
        return Err(Error::invalid(format!(
            "cannot observe {s} entries of a {m}x{n} grid"
        )));
    }
    let mut r = rng.rng();
    let mut displaced: HashMap<u64, u64> = HashMap::with_capacity(2 * s);
    let mut out = Vec::with_capacity(s);
    for k in 0..s as u64 {
        let j = r.random_range(k..total);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        let at_k = *displaced.get(&k).unwrap_or(&k);
        displaced.insert(j, at_k);
        out.push(((at_j / n as u64) as usize, (at_j % n as u64) as usize));
    }
    Ok(out)
}

/// Aggregates with-replacement draws into distinct indices and counts.
pub fn counts_from_draws(draws: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let mut sorted = draws.to_vec();
    sorted.sort_unstable();
    let mut idx = Vec::new();
    let mut cnt: Vec<f64> = Vec::new();
    for i in sorted {
        if idx.last() == Some(&i) {
            *cnt.last_mut().unwrap() += 1.0;
        } else {
            idx.push(i);
            cnt.push(1.0);
        }
    }
    (idx, cnt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn stream(tag: u64) -> RngStream {
        RngStream::new(2024, tag)
    }

    #[test]
    fn full_subsample_is_everything() {
        let ds = Dataset::from_scalars(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let idx = subsample(&ds, 5, &stream(0)).unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn subsample_range_errors() {
        let ds = Dataset::from_scalars(&[1.0, 2.0]).unwrap();
        assert!(matches!(subsample(&ds, 0, &stream(0)), Err(Error::InvalidArgument(_))));
        assert!(matches!(subsample(&ds, 3, &stream(0)), Err(Error::InvalidArgument(_))));
        assert_eq!(subsample_indices(2, 5, true, &stream(0)).unwrap().len(), 5);
    }

    #[test]
    fn subsample_inclusion_frequency() {
        // Inclusion probability m/n = 0.3; binomial band over 1e5 draws.
        let draws = 100_000;
        let mut hits = [0usize; 10];
        let base = stream(1);
        for t in 0..draws {
            for i in subsample_indices(10, 3, false, &base.derive(t)).unwrap() {
                hits[i] += 1;
            }
        }
        let p = 0.3;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - draws as f64 * p).abs() < 4.0 * sd, "hits {h}");
        }
    }

    #[test]
    fn multinomial_single_cell() {
        assert_eq!(multinomial_weights(1, 7, &stream(0)).unwrap(), vec![7.0]);
    }

    #[test]
    fn multinomial_spread_matches_variance() {
        let nominal = 4_000_000usize;
        let w = multinomial_weights(4, nominal, &stream(3)).unwrap();
        assert_eq!(w.iter().sum::<f64>(), nominal as f64);
        let sd = (nominal as f64 * 0.25 * 0.75).sqrt();
        for x in w {
            assert!((x - 1e6).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn multinomial_pmf_matches_enumeration() {
        // Oracle: exact Multinomial(3; 1/3,1/3,1/3) pmf over all 10 compositions.
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        let mut exact = HashMap::new();
        for a in 0..=3usize {
            for b in 0..=(3 - a) {
                let c = 3 - a - b;
                let p = fact(3) / (fact(a) * fact(b) * fact(c)) / 27.0;
                exact.insert((a, b, c), p);
            }
        }
        assert_eq!(exact.len(), 10);
        let draws = 100_000;
        let mut counts: HashMap<(usize, usize, usize), usize> = HashMap::new();
        let base = stream(4);
        for t in 0..draws {
            let w = multinomial_weights(3, 3, &base.derive(t)).unwrap();
            *counts.entry((w[0] as usize, w[1] as usize, w[2] as usize)).or_default() += 1;
        }
        let tv: f64 = exact
            .iter()
            .map(|(k, p)| (counts.get(k).copied().unwrap_or(0) as f64 / draws as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn poisson_rate_one_and_hundred() {
        let base = stream(5);
        let mut total = 0.0;
        let reps = 10_000;
        for t in 0..reps {
            total += poisson_weights(4, 4, &base.derive(t)).unwrap().iter().sum::<f64>();
        }
        assert!((total / (4.0 * reps as f64) - 1.0).abs() < 0.02);

        let mut mean = 0.0;
        for t in 0..reps {
            let w = poisson_weights(100, 10_000, &base.derive(1_000_000 + t)).unwrap();
            assert!(w.iter().all(|x| *x >= 0.0 && x.fract() == 0.0));
            mean += w.iter().sum::<f64>() / 100.0;
        }
        mean /= reps as f64;
        assert!((mean - 100.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn poisson_sums_vary() {
        let base = stream(6);
        let sums: HashSet<u64> = (0..20)
            .map(|t| poisson_weights(10, 10, &base.derive(t)).unwrap().iter().sum::<f64>() as u64)
            .collect();
        assert!(sums.len() > 1);
    }

    #[test]
    fn omega_saturates_and_checks_range() {
        let mut all = sample_omega(2, 2, 4, &stream(7)).unwrap();
        all.sort();
        assert_eq!(all, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert!(sample_omega(2, 2, 5, &stream(7)).is_err());
        assert!(sample_omega(2, 2, 0, &stream(7)).is_err());
    }

    #[test]
    fn omega_uniform_inclusion() {
        let draws = 100_000;
        let mut hits = [[0usize; 3]; 3];
        let base = stream(8);
        for t in 0..draws {
            let om = sample_omega(3, 3, 2, &base.derive(t)).unwrap();
            assert_ne!(om[0], om[1]);
            for (i, j) in om {
                hits[i][j] += 1;
            }
        }
        let p = 2.0 / 9.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for row in hits {
            for h in row {
                assert!((h as f64 - draws as f64 * p).abs() < 4.0 * sd, "hits {h}");
            }
        }
    }

    #[test]
    fn counts_aggregate_draws() {
        let (idx, cnt) = counts_from_draws(&[3, 1, 3, 3, 0]);
        assert_eq!(idx, vec![0, 1, 3]);
        assert_eq!(cnt, vec![1.0, 1.0, 3.0]);
    }

    proptest::proptest! {
        #[test]
        fn omega_distinct_in_bounds(m in 1usize..30, n in 1usize..30, frac in 0.0f64..1.0, seed in 0u64..1000) {
            let s = ((m * n) as f64 * frac).ceil().max(1.0) as usize;
            let om = sample_omega(m, n, s, &RngStream::from_seed(seed)).unwrap();
            proptest::prop_assert_eq!(om.len(), s);
            let set: HashSet<_> = om.iter().copied().collect();
            proptest::prop_assert_eq!(set.len(), s);
            proptest::prop_assert!(om.iter().all(|&(i, j)| i < m && j < n));
        }

        #[test]
        fn subsample_distinct(n in 1usize..200, frac in 0.0f64..1.0, seed in 0u64..1000) {
            let m = ((n as f64) * frac).ceil().max(1.0) as usize;
            let idx = subsample_indices(n, m, false, &RngStream::from_seed(seed)).unwrap();
            proptest::prop_assert_eq!(idx.len(), m);
            proptest::prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert!(idx.iter().all(|&i| i < n));
        }

        #[test]
        fn multinomial_sums_exactly(m in 1usize..50, nominal in 1usize..100_000, seed in 0u64..1000) {
            let w = multinomial_weights(m, nominal, &RngStream::from_seed(seed)).unwrap();
            proptest::prop_assert_eq!(w.len(), m);
            proptest::prop_assert_eq!(w.iter().sum::<f64>(), nominal as f64);
        }
    }
}
