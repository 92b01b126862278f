//! Exact scan statistic.
//!
//! For a fixed column set `T` the best row set is the `k` rows with the
//! largest restricted sums, so only the `C(p, k)` column subsets are
//! enumerated. Row sums are built incrementally along a depth-first walk of
//! the subset lattice, one `p`-vector per depth.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::normal::choose_u128;

/// Maximum number of column subsets an exact scan may enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanBudget {
    pub max_subsets: u64,
}

impl Default for ScanBudget {
    fn default() -> Self {
        ScanBudget { max_subsets: 10_000_000 }
    }
}

impl ScanBudget {
    pub fn unlimited() -> Self {
        ScanBudget { max_subsets: u64::MAX }
    }

    pub fn check(&self, p: usize, k: usize) -> Result<u128> {
        let needed = choose_u128(p as u64, k as u64);
        if needed > u128::from(self.max_subsets) {
            return Err(Error::BudgetExceeded { p, k, needed, budget: self.max_subsets });
        }
        Ok(needed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// `(1/k) * max block sum`.
    pub statistic: f64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Sum of `x` over `rows x cols`, accumulated row by row in index order.
///
/// Both sets must be sorted; every scan value is reported through this
/// function so equal blocks always produce bit-identical sums.
pub fn block_sum(x: &DataMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    let mut s = 0.0;
    for &i in rows {
        let r = x.row(i);
        for &j in cols {
            s += r[j];
        }
    }
    s
}

#[derive(Clone)]
struct Candidate {
    value: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Candidate {
    /// Larger value wins; equal values go to the lexicographically
    /// smaller `(rows, cols)`.
    fn beats(&self, other: &Candidate) -> bool {
        match self.value.partial_cmp(&other.value) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => (&self.rows, &self.cols) < (&other.rows, &other.cols),
        }
    }
}

struct Walker<'a> {
    x: &'a DataMatrix,
    p: usize,
    k: usize,
    /// `sums[d * p + i]` = sum of row i over the first d chosen columns.
    sums: Vec<f64>,
    cols: Vec<usize>,
    top: Vec<(f64, usize)>,
    best: Option<Candidate>,
}

impl<'a> Walker<'a> {
    fn new(x: &'a DataMatrix, k: usize) -> Self {
        let p = x.dim();
        Walker { x, p, k, sums: vec![0.0; (k + 1) * p], cols: Vec::with_capacity(k), top: Vec::with_capacity(k + 1), best: None }
    }

    fn push(&mut self, c: usize) {
        let d = self.cols.len();
        let (prev, next) = self.sums.split_at_mut((d + 1) * self.p);
        let prev = &prev[d * self.p..];
        let next = &mut next[..self.p];
        for i in 0..self.p {
            next[i] = prev[i] + self.x.get(i, c);
        }
        self.cols.push(c);
    }

    fn walk(&mut self, start: usize) {
        if self.cols.len() == self.k {
            self.leaf();
            return;
        }
        let remaining = self.k - self.cols.len();
        for c in start..=(self.p - remaining) {
            self.push(c);
            self.walk(c + 1);
            self.cols.pop();
        }
    }

    fn leaf(&mut self) {
        let sums = &self.sums[self.k * self.p..(self.k + 1) * self.p];
        // top-k rows by restricted sum, ties to the smaller index
        self.top.clear();
        for (i, &s) in sums.iter().enumerate() {
            if self.top.len() < self.k {
                self.top.push((s, i));
            } else if s > self.top[self.k - 1].0 {
                self.top[self.k - 1] = (s, i);
            } else {
                continue;
            }
            let mut j = self.top.len() - 1;
            while j > 0 && self.top[j].0 > self.top[j - 1].0 {
                self.top.swap(j, j - 1);
                j -= 1;
            }
        }
        let approx: f64 = self.top.iter().map(|t| t.0).sum();
        if let Some(b) = &self.best {
            // cheap reject before the canonical recomputation
            if approx < b.value - 1e-9 * (1.0 + b.value.abs()) {
                return;
            }
        }
        let mut rows: Vec<usize> = self.top.iter().map(|t| t.1).collect();
        rows.sort_unstable();
        let cand = Candidate { value: block_sum(self.x, &rows, &self.cols), rows, cols: self.cols.clone() };
        if self.best.as_ref().is_none_or(|b| cand.beats(b)) {
            self.best = Some(cand);
        }
    }
}

/// Exact scan statistic `(1/k) max_{|S|=|T|=k} sum_{S x T} X`.
pub fn t_scan(x: &DataMatrix, k: usize, budget: ScanBudget) -> Result<ScanResult> {
    let p = x.dim();
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!("scan size k = {k} must lie in 1..={p}")));
    }
    budget.check(p, k)?;
    let best = (0..=(p - k))
        .into_par_iter()
        .map(|first| {
            let mut w = Walker::new(x, k);
            w.push(first);
            w.walk(first + 1);
            w.best.expect("every first column has at least one completion")
        })
        .reduce_with(|a, b| if b.beats(&a) { b } else { a })
        .expect("p >= k >= 1");
    Ok(ScanResult { statistic: best.value / k as f64, rows: best.rows, cols: best.cols })
}
