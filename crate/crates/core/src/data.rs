//! Core data containers: observation tables, weighted resamples, and
//! partially observed matrices.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// `n` observation rows of dimension `d`, with an optional scalar response.
///
/// Features are stored row-major so that a row is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    response: Option<Vec<f64>>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, d: usize, response: Option<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if features.is_empty() || features.len() % d != 0 {
            return Err(Error::invalid(format!(
                "feature buffer of length {} is not a positive multiple of d = {d}",
                features.len()
            )));
        }
        let n = features.len() / d;
        if let Some(y) = &response {
            if y.len() != n {
                return Err(Error::invalid(format!(
                    "response has {} entries for {n} rows",
                    y.len()
                )));
            }
        }
        Ok(Dataset {
            features,
            response,
            n,
            d,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], response: Option<Vec<f64>>) -> Result<Self> {
        let d = rows
            .first()
            .ok_or_else(|| Error::invalid("dataset needs at least one row"))?
            .len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!(
                "row {bad} has length {}, expected {d}",
                rows[bad].len()
            )));
        }
        Dataset::new(rows.concat(), d, response)
    }

    /// One-dimensional dataset without a response.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Dataset::new(values.to_vec(), 1, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn response(&self) -> Option<&[f64]> {
        self.response.as_deref()
    }
}

/// A conceptual size-`nominal` resample stored as weights on `m` distinct rows.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub nominal: usize,
}

impl WeightedSample {
    pub fn new(indices: Vec<usize>, weights: Vec<f64>, nominal: usize) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} indices but {} weights",
                indices.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weight {w} is not a finite nonnegative number")));
        }
        let mut seen = HashSet::with_capacity(indices.len());
        if let Some(dup) = indices.iter().find(|i| !seen.insert(**i)) {
            return Err(Error::invalid(format!("index {dup} appears twice")));
        }
        Ok(WeightedSample {
            indices,
            weights,
            nominal,
        })
    }

    /// Every row of an `n`-row dataset with weight one.
    pub fn uniform(n: usize) -> Self {
        WeightedSample {
            indices: (0..n).collect(),
            weights: vec![1.0; n],
            nominal: n,
        }
    }

    /// Unit weights on the given distinct rows.
    pub fn unit(indices: Vec<usize>) -> Result<Self> {
        let m = indices.len();
        WeightedSample::new(indices, vec![1.0; m], m)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n) {
            Some(i) => Err(Error::invalid(format!("row index {i} out of range for {n} rows"))),
            None => Ok(()),
        }
    }
}

/// Entries of an `nrows x ncols` matrix revealed at the index set omega.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedMatrix {
    nrows: usize,
    ncols: usize,
    omega: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl ObservedMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        omega: Vec<(usize, usize)>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if omega.is_empty() {
            return Err(Error::invalid("at least one observed entry is required"));
        }
        if omega.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} locations but {} values",
                omega.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(omega.len());
        for &(i, j) in &omega {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("entry ({i}, {j}) observed twice")));
            }
        }
        Ok(ObservedMatrix {
            nrows,
            ncols,
            omega,
            values,
        })
    }

    /// Reveals `f(i, j)` at every location in `omega`.
    pub fn from_fn(
        nrows: usize,
        ncols: usize,
        omega: Vec<(usize, usize)>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let values = omega.iter().map(|&(i, j)| f(i, j)).collect();
        ObservedMatrix::new(nrows, ncols, omega, values)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn omega(&self) -> &[(usize, usize)] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of observed entries.
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.omega
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}
