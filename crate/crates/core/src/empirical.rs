//! Pseudo-observations and the empirical copula.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dependence::average_ranks;
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Rank-transformed sample with entries in `(0, 1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoSample {
    u: DataMatrix,
    /// Set when some column contained ties (average ranks were used).
    ties: bool,
    #[serde(skip)]
    at_sample: OnceLock<Vec<f64>>,
}

impl PartialEq for PseudoSample {
    fn eq(&self, other: &Self) -> bool {
        self.u == other.u && self.ties == other.ties
    }
}

/// Rank transform each column: `U_ij = rank_ij / (n + 1)`, average ranks on ties.
pub fn pseudo_observations(data: &DataMatrix) -> Result<PseudoSample> {
    let (n, d) = (data.nrows(), data.ncols());
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("empty data matrix".into()));
    }
    if data.as_slice().iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("NaN entry in data".into()));
    }
    let denom = (n + 1) as f64;
    let mut u = DataMatrix::zeros(n, d);
    let mut ties = false;
    for j in 0..d {
        let col = data.column(j);
        let ranks = average_ranks(&col);
        ties |= has_duplicates(&col);
        for (i, r) in ranks.into_iter().enumerate() {
            u.row_mut(i)[j] = r / denom;
        }
    }
    Ok(PseudoSample {
        u,
        ties,
        at_sample: OnceLock::new(),
    })
}

fn has_duplicates(col: &[f64]) -> bool {
    let mut s = col.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s.windows(2).any(|w| w[0] == w[1])
}

impl PseudoSample {
    /// Wraps values that are already pseudo-observations (entries in `(0, 1)`).
    pub fn from_unit(u: DataMatrix) -> Result<Self> {
        if u.nrows() == 0 || u.ncols() == 0 {
            return Err(Error::InvalidInput("empty pseudo-sample".into()));
        }
        if u.as_slice().iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::InvalidInput(
                "pseudo-observations must lie strictly inside (0, 1)".into(),
            ));
        }
        let ties = (0..u.ncols()).any(|j| has_duplicates(&u.column(j)));
        Ok(Self {
            u,
            ties,
            at_sample: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn d(&self) -> usize {
        self.u.ncols()
    }

    pub fn matrix(&self) -> &DataMatrix {
        &self.u
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.u.row(i)
    }

    pub fn has_ties(&self) -> bool {
        self.ties
    }

    /// Index of the first column in which every value is equal, if any.
    pub fn constant_column(&self) -> Option<usize> {
        (0..self.d()).find(|&j| {
            let first = self.u.get(0, j);
            (0..self.n()).all(|i| self.u.get(i, j) == first)
        })
    }

    /// Rows with the given indices, re-ranked within the subset.
    pub fn rerank_subset(&self, idx: &[usize]) -> Result<Self> {
        pseudo_observations(&self.u.select_rows(idx))
    }

    /// Rows with the given indices, keeping their current values.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            u: self.u.select_rows(idx),
            ties: self.ties,
            at_sample: OnceLock::new(),
        }
    }

    pub fn empirical(&self) -> EmpiricalCopula<'_> {
        EmpiricalCopula { sample: self }
    }
}

/// Step-function copula `Ĉ(u) = #{i : U_i ≤ u} / (n + 1)`.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalCopula<'a> {
    sample: &'a PseudoSample,
}

impl<'a> EmpiricalCopula<'a> {
    pub fn sample(&self) -> &'a PseudoSample {
        self.sample
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.sample.d() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, sample dimension is {}",
                u.len(),
                self.sample.d()
            )));
        }
        if u.iter().any(|x| x.is_nan() || !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput("coordinates must lie in [0, 1]".into()));
        }
        let count = self
            .sample
            .u
            .rows()
            .filter(|r| r.iter().zip(u).all(|(a, b)| a <= b))
            .count();
        Ok(count as f64 / (self.sample.n() + 1) as f64)
    }

    /// `(Ĉ(U_1), …, Ĉ(U_n))`, computed once and cached.
    pub fn eval_at_sample(&self) -> &'a [f64] {
        self.sample.at_sample.get_or_init(|| {
            let counts = if self.sample.d() == 2 {
                dominance_counts_2d(&self.sample.u)
            } else {
                dominance_counts_naive(&self.sample.u)
            };
            let denom = (self.sample.n() + 1) as f64;
            counts.into_iter().map(|c| c as f64 / denom).collect()
        })
    }
}

/// For each row, the number of rows componentwise ≤ it (itself included).
fn dominance_counts_naive(u: &DataMatrix) -> Vec<usize> {
    let n = u.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = u.row(i);
            u.rows()
                .filter(|rk| rk.iter().zip(ri).all(|(a, b)| a <= b))
                .count()
        })
        .collect()
}

/// Sorted sweep over the first coordinate with a Fenwick tree over the second.
fn dominance_counts_2d(u: &DataMatrix) -> Vec<usize> {
    let n = u.nrows();
    let mut ys: Vec<f64> = (0..n).map(|i| u.get(i, 1)).collect();
    ys.sort_by(|a, b| a.total_cmp(b));
    ys.dedup();
    let y_rank = |y: f64| ys.partition_point(|&v| v < y) + 1;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u.get(a, 0).total_cmp(&u.get(b, 0)));

    let mut tree = vec![0usize; ys.len() + 1];
    let mut out = vec![0usize; n];
    let mut start = 0;
    while start < n {
        let x = u.get(order[start], 0);
        let mut end = start;
        while end < n && u.get(order[end], 0) == x {
            let mut k = y_rank(u.get(order[end], 1));
            while k < tree.len() {
                tree[k] += 1;
                k += k & k.wrapping_neg();
            }
            end += 1;
        }
        for &i in &order[start..end] {
            let mut k = y_rank(u.get(i, 1));
            let mut s = 0;
            while k > 0 {
                s += tree[k];
                k -= k & k.wrapping_neg();
            }
            out[i] = s;
        }
        start = end;
    }
    out
}
