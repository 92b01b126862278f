//! Dyadic approximations of the truncated laws.
//!
//! Atoms are the left endpoints `j 2^-w` of the w-bit cells covering
//! `[-M, M]`; masses are multiples of `2^-T`, so a draw is one inverse-CDF
//! lookup of a uniform integer `U` in `1..=2^T` built from exactly `T` coins.

use serde::{Deserialize, Serialize};

use super::truncated::{Branch, TruncatedPair};
use crate::error::{Error, Result};
use crate::oracles::DiscreteDist;
use crate::rng::CoinSource;

/// Largest atom count for which a full CDF table is built.
pub const TABLE_LIMIT: u128 = 1 << 25;

/// How table masses are rounded to `T` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    /// `q_i = floor(p_i 2^T)` for every atom but the leftmost, which takes
    /// the remainder.
    PerAtom,
    /// Cumulative values `floor(F(x) 2^T)` at the cell boundaries, the same
    /// numbers the lazy evaluator produces.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMode {
    Table(Rounding),
    Lazy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomGrid {
    pub m: f64,
    pub w: u32,
    /// Mantissa of the leftmost atom.
    pub first: i128,
    pub count: u128,
}

impl AtomGrid {
    pub fn new(m: f64, w: u32) -> Result<Self> {
        if w > 120 {
            return Err(Error::InvalidParameter(format!("atom resolution w = {w} too large")));
        }
        let scale = 2f64.powi(w as i32);
        let first = (-m * scale).floor() as i128;
        let end = (m * scale).ceil() as i128;
        let count = u128::try_from(end - first).map_err(|_| Error::InvalidParameter("atom count overflow".into()))?;
        Ok(AtomGrid { m, w, first, count })
    }

    #[inline]
    pub fn mantissa(&self, idx: u128) -> i128 {
        self.first + idx as i128
    }

    pub fn value(&self, idx: u128) -> f64 {
        self.mantissa(idx) as f64 * 2f64.powi(-(self.w as i32))
    }

    /// `[lo, hi)` of cell `idx`, clipped to `[-M, M]`.
    pub fn cell(&self, idx: u128) -> (f64, f64) {
        let h = 2f64.powi(-(self.w as i32));
        let lo = self.mantissa(idx) as f64 * h;
        ((lo).max(-self.m), (lo + h).min(self.m))
    }
}

/// Smallest `j < count` with `f(j) >= u`; `f(count - 1)` must be `>= u`.
fn first_at_least(count: u128, u: u128, f: impl Fn(u128) -> u128) -> u128 {
    let (mut lo, mut hi) = (0u128, count - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if f(mid) >= u {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

#[derive(Debug, Clone)]
pub struct DyadicQ {
    pair: TruncatedPair,
    branch: Branch,
    grid: AtomGrid,
    big_t: u32,
    mode: QMode,
    /// Cumulative units per atom; empty in lazy mode.
    table: Vec<u128>,
}

impl DyadicQ {
    pub fn new(pair: TruncatedPair, branch: Branch, w: u32, big_t: u32, mode: QMode) -> Result<Self> {
        if big_t == 0 || big_t > 127 {
            return Err(Error::InvalidParameter(format!("coin width T = {big_t} must lie in 1..=127")));
        }
        let grid = AtomGrid::new(pair.m, w)?;
        let mut q = DyadicQ { pair, branch, grid, big_t, mode, table: Vec::new() };
        match mode {
            QMode::Lazy => {}
            QMode::Table(r) => {
                if grid.count > TABLE_LIMIT {
                    return Err(Error::InvalidParameter(format!("{} atoms exceed the table limit {TABLE_LIMIT}", grid.count)));
                }
                q.table = match r {
                    Rounding::Cumulative => (0..grid.count).map(|j| q.analytic_units(j)).collect(),
                    Rounding::PerAtom => q.per_atom_table()?,
                };
            }
        }
        Ok(q)
    }

    /// Table with per-atom rounding when it fits, lazy otherwise.
    pub fn auto(pair: TruncatedPair, branch: Branch, w: u32, big_t: u32) -> Result<Self> {
        let count = AtomGrid::new(pair.m, w)?.count;
        let mode = if count <= TABLE_LIMIT { QMode::Table(Rounding::PerAtom) } else { QMode::Lazy };
        Self::new(pair, branch, w, big_t, mode)
    }

    fn one(&self) -> u128 {
        1u128 << self.big_t
    }

    fn units(&self, prob: f64) -> u128 {
        (prob * 2f64.powi(self.big_t as i32)).floor() as u128
    }

    /// `floor(F(upper edge of cell j) 2^T)`, with the last cell pinned to `2^T`.
    fn analytic_units(&self, j: u128) -> u128 {
        if j + 1 >= self.grid.count {
            return self.one();
        }
        let hi = self.grid.cell(j).1;
        self.units(self.pair.cdf(self.branch, hi)).min(self.one())
    }

    fn per_atom_table(&self) -> Result<Vec<u128>> {
        let n = self.grid.count;
        let mut q: Vec<u128> = (0..n)
            .map(|j| {
                let (lo, hi) = self.grid.cell(j);
                self.units(self.pair.mass(self.branch, lo, hi))
            })
            .collect();
        let rest: u128 = q[1..].iter().sum();
        q[0] = self.one().checked_sub(rest).ok_or_else(|| Error::Numerical("rounded masses exceed one".into()))?;
        let mut acc = 0u128;
        for v in q.iter_mut() {
            acc += *v;
            *v = acc;
        }
        Ok(q)
    }

    pub fn grid(&self) -> &AtomGrid {
        &self.grid
    }

    pub fn coin_width(&self) -> u32 {
        self.big_t
    }

    pub fn mode(&self) -> QMode {
        self.mode
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// Cumulative mass through atom `j`, in units of `2^-T`.
    pub fn cdf_units(&self, j: u128) -> u128 {
        match self.mode {
            QMode::Lazy => self.analytic_units(j),
            QMode::Table(_) => self.table[j as usize],
        }
    }

    /// Atom index selected by `u` in `1..=2^T`.
    pub fn index_for(&self, u: u128) -> u128 {
        debug_assert!(u >= 1 && u <= self.one());
        match self.mode {
            QMode::Lazy => first_at_least(self.grid.count, u, |j| self.analytic_units(j)),
            QMode::Table(_) => first_at_least(self.grid.count, u, |j| self.table[j as usize]),
        }
    }

    /// One draw from `T` coins at `offset`; returns the atom mantissa at scale `w`.
    pub fn sample(&self, coins: &dyn CoinSource, offset: u64) -> Result<i128> {
        let u = coins.bits(offset, self.big_t)? + 1;
        Ok(self.grid.mantissa(self.index_for(u)))
    }

    /// The table distribution as f64 masses.
    pub fn to_dist(&self) -> Result<DiscreteDist> {
        if self.table.is_empty() {
            return Err(Error::InvalidParameter("lazy distributions have no materialized table".into()));
        }
        let scale = 2f64.powi(-(self.big_t as i32));
        let mut prev = 0u128;
        let mut masses = Vec::with_capacity(self.table.len());
        for &c in &self.table {
            masses.push(c.saturating_sub(prev) as f64 * scale);
            prev = prev.max(c);
        }
        DiscreteDist::new((0..self.grid.count).map(|j| self.grid.value(j)).collect(), masses)
    }
}

/// Law of `[X]_w` for `X` drawn from the branch, with f64 masses.
pub fn quantized_law(pair: &TruncatedPair, branch: Branch, w: u32) -> Result<DiscreteDist> {
    let grid = AtomGrid::new(pair.m, w)?;
    if grid.count > TABLE_LIMIT {
        return Err(Error::InvalidParameter(format!("{} atoms exceed the table limit", grid.count)));
    }
    let atoms = (0..grid.count).map(|j| grid.value(j)).collect();
    let masses = (0..grid.count)
        .map(|j| {
            let (lo, hi) = grid.cell(j);
            pair.mass(branch, lo, hi)
        })
        .collect();
    DiscreteDist::new(atoms, masses)
}
