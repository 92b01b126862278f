//! Average-case reduction from planted clique to submatrix detection.
//!
//! The graph's lower-left quarter `A0` (size `N2 x N2`) selects, entry by
//! entry, a draw from `F1` (edge) or `F0` (no edge); the resulting matrix is
//! cut into `l x l` blocks of size `p x p` which are summed and divided by `l`.
//! The discretized variant draws from the dyadic laws `Q0`, `Q1` using exactly
//! `T` coins per draw and does all arithmetic on integer mantissas.

pub mod dyadic;
pub mod params;
pub mod truncated;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dyadic::{quantized_law, AtomGrid, DyadicQ, QMode, Rounding, TABLE_LIMIT};
pub use params::{composition_slack, largest_ell, CompositionSlack, ReductionParams, WChoice};
pub use truncated::{Branch, TruncatedPair};

use crate::error::{Error, Result};
use crate::model::{DataMatrix, QuantizedMatrix};
use crate::plantedclique::{AdjacencyMatrix, BitMatrix};
use crate::rng::{CoinSource, StreamKey};

/// `B_ij = B0_ij (1 - A0_ij) + B1_ij A0_ij`.
pub fn gaussianize(a0: &BitMatrix, b0: &DataMatrix, b1: &DataMatrix) -> Result<DataMatrix> {
    let n = a0.rows();
    if a0.cols() != n || b0.dim() != n || b1.dim() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n}"),
            found: format!("A0 {}x{}, B0 {}, B1 {}", a0.rows(), a0.cols(), b0.dim(), b1.dim()),
        });
    }
    Ok(DataMatrix::from_fn(n, |i, j| if a0.get(i, j) { b1.get(i, j) } else { b0.get(i, j) }))
}

/// `X_ab = (1/l) sum_{r, s < l} B_{rp + a, sp + b}`.
pub fn partition_average(b: &DataMatrix, p: usize, ell: usize) -> Result<DataMatrix> {
    if p == 0 || ell == 0 || b.dim() != p * ell {
        return Err(Error::ShapeMismatch { expected: format!("{}x{}", p * ell, p * ell), found: format!("{0}x{0}", b.dim()) });
    }
    let mut x = DataMatrix::zeros(p);
    for i in 0..b.dim() {
        for (j, &v) in b.row(i).iter().enumerate() {
            let (a, c) = (i % p, j % p);
            x.set(a, c, x.get(a, c) + v);
        }
    }
    for v in x.as_mut_slice() {
        *v /= ell as f64;
    }
    Ok(x)
}

fn check_graph(g: &AdjacencyMatrix, params: &ReductionParams) -> Result<BitMatrix> {
    if g.n() != params.n {
        return Err(Error::ShapeMismatch { expected: format!("graph on N = {} vertices", params.n), found: format!("{}", g.n()) });
    }
    g.lower_left_quarter()
}

/// Continuous reduction. Entry `(i, j)` of `B0` and `B1` is drawn from the
/// streams `key.child(0).cell(i, j)` and `key.child(1).cell(i, j)`.
pub fn reduce_continuous(g: &AdjacencyMatrix, params: &ReductionParams, key: StreamKey) -> Result<DataMatrix> {
    let a0 = check_graph(g, params)?;
    let pair = TruncatedPair::new(params.m, params.mu)?;
    let (p, ell, n2) = (params.p, params.ell, params.n2);
    let (k0, k1) = (key.child(0), key.child(1));
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|a| {
            let mut acc = vec![0.0; p];
            for r in 0..ell {
                let i = r * p + a;
                for j in 0..n2 {
                    let b0 = pair.sample_f0(&mut k0.cell(i, j).rng())?;
                    let b1 = pair.sample_f1(&mut k1.cell(i, j).rng())?;
                    acc[j % p] += if a0.get(i, j) { b1 } else { b0 };
                }
            }
            Ok(acc.into_iter().map(|v| v / ell as f64).collect())
        })
        .collect::<Result<_>>()?;
    DataMatrix::from_vec(p, rows.concat())
}

/// Random bits drawn by the discretized reduction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinLedger {
    pub b0_bits: u64,
    pub b1_bits: u64,
    pub samples: u64,
}

impl CoinLedger {
    pub fn total(&self) -> u64 {
        self.b0_bits + self.b1_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetForecast {
    pub ledger: CoinLedger,
    /// `M 2^w T + N^2 (log2 M + w + t)`.
    pub operations: f64,
}

pub fn bit_budget(params: &ReductionParams) -> BudgetForecast {
    let cells = (params.n2 * params.n2) as u64;
    let bits = cells * u64::from(params.big_t);
    let n = params.n as f64;
    let operations = params.m * 2f64.powi(params.w as i32) * f64::from(params.big_t)
        + n * n * (params.m.log2() + f64::from(params.w) + f64::from(params.t));
    BudgetForecast { ledger: CoinLedger { b0_bits: bits, b1_bits: bits, samples: 2 * cells }, operations }
}

/// The discretized reduction with its two dyadic laws built once.
#[derive(Debug, Clone)]
pub struct DiscreteReducer {
    params: ReductionParams,
    q0: DyadicQ,
    q1: DyadicQ,
}

impl DiscreteReducer {
    pub fn new(params: &ReductionParams, mode: QMode) -> Result<Self> {
        let pair = TruncatedPair::new(params.m, params.mu)?;
        Ok(DiscreteReducer {
            params: params.clone(),
            q0: DyadicQ::new(pair, Branch::F0, params.w, params.big_t, mode)?,
            q1: DyadicQ::new(pair, Branch::F1, params.w, params.big_t, mode)?,
        })
    }

    /// Per-atom table when it fits, lazy evaluation otherwise.
    pub fn auto(params: &ReductionParams) -> Result<Self> {
        let pair = TruncatedPair::new(params.m, params.mu)?;
        Ok(DiscreteReducer {
            params: params.clone(),
            q0: DyadicQ::auto(pair, Branch::F0, params.w, params.big_t)?,
            q1: DyadicQ::auto(pair, Branch::F1, params.w, params.big_t)?,
        })
    }

    pub fn params(&self) -> &ReductionParams {
        &self.params
    }

    pub fn q0(&self) -> &DyadicQ {
        &self.q0
    }

    pub fn q1(&self) -> &DyadicQ {
        &self.q1
    }

    /// Coins read, relative to `offset`: entry `(i, j)` of `B0` uses
    /// `[r T, (r+1) T)` with `r = i N2 + j`, and `B1` the same range shifted
    /// by `N2^2 T`.
    pub fn reduce(&self, g: &AdjacencyMatrix, coins: &dyn CoinSource, offset: u64) -> Result<(QuantizedMatrix, CoinLedger)> {
        let a0 = check_graph(g, &self.params)?;
        let ReductionParams { p, ell, n2, t, w, big_t, .. } = self.params;
        let tw = u64::from(big_t);
        let cells = (n2 * n2) as u64;
        let rows: Vec<(Vec<i128>, CoinLedger)> = (0..p)
            .into_par_iter()
            .map(|a| {
                let mut acc = vec![0i128; p];
                let mut ledger = CoinLedger::default();
                for r in 0..ell {
                    let i = r * p + a;
                    for j in 0..n2 {
                        let rank = (i * n2 + j) as u64;
                        let b0 = self.q0.sample(coins, offset + rank * tw)?;
                        let b1 = self.q1.sample(coins, offset + (cells + rank) * tw)?;
                        ledger.b0_bits += tw;
                        ledger.b1_bits += tw;
                        ledger.samples += 2;
                        acc[j % p] += if a0.get(i, j) { b1 } else { b0 };
                    }
                }
                Ok((acc, ledger))
            })
            .collect::<Result<_>>()?;
        // S 2^-w / l floored at scale t
        let up = t.saturating_sub(w);
        let denom = (ell as i128) << w.saturating_sub(t);
        let mut ledger = CoinLedger::default();
        let mut mantissas = Vec::with_capacity(p * p);
        for (acc, l) in rows {
            ledger.b0_bits += l.b0_bits;
            ledger.b1_bits += l.b1_bits;
            ledger.samples += l.samples;
            for s in acc {
                let v = (s << up).div_euclid(denom);
                mantissas.push(i64::try_from(v).map_err(|_| Error::MantissaOverflow { value: v as f64, scale: t })?);
            }
        }
        Ok((QuantizedMatrix::from_mantissas(p, t, mantissas)?, ledger))
    }
}

/// One-shot discretized reduction with automatically chosen tables.
pub fn reduce_discrete(g: &AdjacencyMatrix, params: &ReductionParams, coins: &dyn CoinSource) -> Result<(QuantizedMatrix, CoinLedger)> {
    DiscreteReducer::auto(params)?.reduce(g, coins, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plantedclique::{fold, sample_er, sample_planted, split_clique};
    use crate::rng::{BitCoins, SeededCoins};

    fn desk() -> ReductionParams {
        ReductionParams::desk(8, 1, 2, 8, 10).unwrap()
    }

    #[test]
    fn gaussianize_selects_by_edge() {
        let b0 = DataMatrix::from_fn(4, |i, j| (i * 4 + j) as f64);
        let b1 = DataMatrix::from_fn(4, |i, j| -((i * 4 + j) as f64) - 1.0);
        assert_eq!(gaussianize(&BitMatrix::zeros(4, 4), &b0, &b1).unwrap(), b0);
        assert_eq!(gaussianize(&BitMatrix::ones(4, 4), &b0, &b1).unwrap(), b1);
        let mut a = BitMatrix::zeros(4, 4);
        a.set(1, 2, true);
        a.set(3, 0, true);
        let b = gaussianize(&a, &b0, &b1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(b.get(i, j), if a.get(i, j) { b1.get(i, j) } else { b0.get(i, j) });
            }
        }
        assert!(gaussianize(&a, &DataMatrix::zeros(3), &b1).is_err());
    }

    #[test]
    fn partition_average_examples() {
        let b = DataMatrix::from_fn(3, |i, j| (i * 3 + j) as f64);
        assert_eq!(partition_average(&b, 3, 1).unwrap(), b);
        assert_eq!(partition_average(&DataMatrix::filled(12, 1.0), 4, 3).unwrap(), DataMatrix::filled(4, 3.0));
        let (p, ell) = (3, 4);
        let b = DataMatrix::from_fn(p * ell, |i, j| ((i * 31 + j * 7) % 11) as f64 - 5.0);
        let x = partition_average(&b, p, ell).unwrap();
        for a in 0..p {
            for c in 0..p {
                let mut s = 0.0;
                for i in (0..p * ell).filter(|&i| fold(i, p) == a) {
                    for j in (0..p * ell).filter(|&j| fold(j, p) == c) {
                        s += b.get(i, j);
                    }
                }
                assert!((x.get(a, c) - s / ell as f64).abs() < 1e-12);
            }
        }
        assert!(partition_average(&b, 5, 2).is_err());
    }

    #[test]
    fn continuous_reduction_is_deterministic_and_shaped() {
        let params = desk();
        let g = sample_er(params.n, StreamKey::new(1));
        let x = reduce_continuous(&g, &params, StreamKey::new(2)).unwrap();
        assert_eq!(x.dim(), 8);
        assert_eq!(x, reduce_continuous(&g, &params, StreamKey::new(2)).unwrap());
        assert!(x.as_slice().iter().all(|v| v.abs() <= params.ell as f64 * params.m));
    }

    #[test]
    fn continuous_alternative_has_elevated_block() {
        let params = desk();
        let pair = TruncatedPair::new(params.m, params.mu).unwrap();
        let reps = 400;
        let (mut inside, mut count) = (0.0, 0usize);
        for s in 0..reps {
            let g = sample_planted(params.n, 12, StreamKey::new(s)).unwrap();
            let (v1, v2) = split_clique(g.planted().unwrap(), params.n).unwrap();
            let x = reduce_continuous(&g, &params, StreamKey::new(1000 + s)).unwrap();
            for &i in &v1 {
                for &j in &v2 {
                    inside += x.get(fold(i, params.p), fold(j, params.p));
                    count += 1;
                }
            }
        }
        let mean = inside / count as f64;
        // each folded cell holds at least one F1 draw among l^2 unit-variance terms
        let floor = pair.mean(Branch::F1) / params.ell as f64;
        assert!(mean > floor - 6.0 / (count as f64).sqrt(), "mean {mean} floor {floor}");
    }

    #[test]
    fn discrete_reduction_is_deterministic_and_accounted() {
        let params = desk();
        let red = DiscreteReducer::auto(&params).unwrap();
        let g = sample_planted(params.n, 6, StreamKey::new(5)).unwrap();
        let coins = SeededCoins::new(9);
        let (x1, l1) = red.reduce(&g, &coins, 0).unwrap();
        let (x2, l2) = red.reduce(&g, &coins, 0).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(l1, l2);
        assert_eq!(l1, bit_budget(&params).ledger);
        assert_eq!(l1.total(), 2 * 16 * 16 * 28);
        let bound = params.ell as f64 * params.m + 1.0;
        assert!(x1.to_real().as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn discrete_reduction_fails_on_short_coin_stream() {
        let params = desk();
        let g = sample_er(params.n, StreamKey::new(5));
        let need = bit_budget(&params).ledger.total();
        let short = BitCoins::take_from(&SeededCoins::new(1), need - 1);
        assert!(reduce_discrete(&g, &params, &short).is_err());
        let exact = BitCoins::take_from(&SeededCoins::new(1), need);
        assert_eq!(reduce_discrete(&g, &params, &exact).unwrap(), reduce_discrete(&g, &params, &SeededCoins::new(1)).unwrap());
    }

    #[test]
    fn single_block_null_is_requantized_q0() {
        let params = ReductionParams::desk(4, 1, 1, 6, 10).unwrap();
        let g = AdjacencyMatrix::empty(params.n);
        let red = DiscreteReducer::auto(&params).unwrap();
        let coins = SeededCoins::new(17);
        let (x, _) = red.reduce(&g, &coins, 0).unwrap();
        let tw = u64::from(params.big_t);
        for i in 0..4 {
            for j in 0..4 {
                let m = red.q0().sample(&coins, (i * 4 + j) as u64 * tw).unwrap();
                assert_eq!(i128::from(x.get(i, j).mantissa()), m >> (params.w - params.t));
            }
        }
    }

    #[test]
    fn forecast_arithmetic() {
        let mut params = desk();
        params.n = 8;
        params.n2 = 4;
        params.big_t = 20;
        assert_eq!(bit_budget(&params).ledger.total(), 640);
    }
}
