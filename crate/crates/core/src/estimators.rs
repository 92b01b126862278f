//! Sparse mean estimation by thresholding and row selection, Schatten norms
//! and Monte Carlo risk.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_gaussian, DataMatrix, MeanMatrixSpec};
use crate::oracles::Z95;
use crate::rng::StreamKey;

/// `sqrt(4 ln p)`.
pub fn default_threshold(p: usize) -> f64 {
    (4.0 * (p as f64).ln()).sqrt()
}

/// Zeroes every entry with `|x| <= level`.
pub fn hard_threshold(x: &DataMatrix, level: f64) -> DataMatrix {
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        if v.abs() <= level {
            *v = 0.0;
        }
    }
    out
}

/// Keeps the `k` rows of largest l2 norm (ties to the smaller index).
pub fn row_project(theta: &DataMatrix, k: usize) -> Result<DataMatrix> {
    let p = theta.dim();
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!("row count k = {k} must lie in 1..={p}")));
    }
    let mut norms: Vec<(f64, usize)> = (0..p).map(|i| (theta.row(i).iter().map(|v| v * v).sum(), i)).collect();
    norms.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut keep = vec![false; p];
    for &(_, i) in &norms[..k] {
        keep[i] = true;
    }
    Ok(DataMatrix::from_fn(p, |i, j| if keep[i] { theta.get(i, j) } else { 0.0 }))
}

/// Hard thresholding at `level`, then projection onto `k` rows.
pub fn threshold_project(x: &DataMatrix, k: usize, level: f64) -> Result<DataMatrix> {
    row_project(&hard_threshold(x, level), k)
}

pub fn singular_values(a: &DataMatrix) -> Result<Vec<f64>> {
    let p = a.dim();
    if p == 0 {
        return Ok(Vec::new());
    }
    let m = DMatrix::from_row_slice(p, p, a.as_slice());
    let svd = m.try_svd(false, false, f64::EPSILON, 0).ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Schatten-q norm, `q` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchattenNorm {
    q: f64,
}

impl SchattenNorm {
    pub fn new(q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::InvalidParameter(format!("Schatten exponent q = {q} must be at least 1")));
        }
        Ok(SchattenNorm { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// lq norm of a list of singular values.
    pub fn of_values(&self, s: &[f64]) -> f64 {
        if self.q.is_infinite() {
            return s.iter().copied().fold(0.0, f64::max);
        }
        let top = s.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0.0;
        }
        // scale by the largest value to keep s^q in range
        top * s.iter().map(|v| (v / top).powf(self.q)).sum::<f64>().powf(1.0 / self.q)
    }

    pub fn norm(&self, a: &DataMatrix) -> Result<f64> {
        if self.q == 2.0 {
            return Ok(a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        Ok(self.of_values(&singular_values(a)?))
    }
}

pub fn schatten(a: &DataMatrix, q: f64) -> Result<f64> {
    SchattenNorm::new(q)?.norm(a)
}

/// `(1 v k^(1/q - 1/2))`, the factor relating S_q to S_2 on rank-k matrices.
pub fn schatten_rank_factor(k: usize, q: f64) -> f64 {
    let e = if q.is_infinite() { -0.5 } else { 1.0 / q - 0.5 };
    (k as f64).powf(e).max(1.0)
}

/// `k^(2/q + 1) + k^((2/q) v 1) ln(e p / k)`.
pub fn minimax_rate(p: usize, k: usize, q: f64) -> f64 {
    let (pf, kf) = (p as f64, k as f64);
    let two_q = if q.is_infinite() { 0.0 } else { 2.0 / q };
    kf.powf(two_q + 1.0) + kf.powf(two_q.max(1.0)) * (std::f64::consts::E * pf / kf).ln()
}

/// `k^2 ln(e p / k)`, the squared-Frobenius rate.
pub fn frobenius_rate(p: usize, k: usize) -> f64 {
    let kf = k as f64;
    kf * kf * (std::f64::consts::E * p as f64 / kf).ln()
}

/// Monte Carlo mean of a nonnegative loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub trials: u64,
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RiskEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let se = (var / n).sqrt();
        RiskEstimate { trials: xs.len() as u64, mean, se, ci_low: mean - Z95 * se, ci_high: mean + Z95 * se }
    }
}

/// `E ||est(X) - theta||_{S_q}^2` with trial `i` drawn from
/// `StreamKey::new(seed).child(i)`.
pub fn risk_estimate<F>(estimator: F, theta: &MeanMatrixSpec, q: f64, trials: u64, seed: u64) -> Result<RiskEstimate>
where
    F: Fn(&DataMatrix) -> Result<DataMatrix> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let norm = SchattenNorm::new(q)?;
    let dense = theta.dense();
    let key = StreamKey::new(seed);
    let losses: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let x = sample_gaussian(theta, key.child(i));
            let est = estimator(&x)?;
            Ok(norm.norm(&est.sub(&dense))?.powi(2))
        })
        .collect::<Result<_>>()?;
    Ok(RiskEstimate::from_samples(&losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(seed: u64, p: usize) -> DataMatrix {
        let mut r = StreamKey::new(seed).rng();
        DataMatrix::from_fn(p, |_, _| r.gen_range(-2.0..2.0))
    }

    #[test]
    fn threshold_extremes_and_idempotence() {
        let x = random_matrix(1, 6);
        assert_eq!(hard_threshold(&x, 0.0), x);
        assert_eq!(hard_threshold(&x, f64::INFINITY), DataMatrix::zeros(6));
        let once = hard_threshold(&x, 0.7);
        assert_eq!(hard_threshold(&once, 0.7), once);
    }

    #[test]
    fn null_survivor_count_matches_tail() {
        let p = 64;
        let level = (2.0 * 2.0 * (p as f64).ln()).sqrt();
        let trials = 400;
        let survivors: usize = (0..trials)
            .map(|s| {
                let x = sample_gaussian(&MeanMatrixSpec::zero(p), StreamKey::new(s));
                hard_threshold(&x, level).as_slice().iter().filter(|v| **v != 0.0).count()
            })
            .sum();
        let expect = (p * p) as f64 * 2.0 * normal::sf(level);
        let mean = survivors as f64 / trials as f64;
        assert!((mean - expect).abs() < 4.0 * (expect / trials as f64).sqrt() + 1e-9, "mean {mean} expect {expect}");
    }

    #[test]
    fn row_project_examples() {
        let x = random_matrix(2, 5);
        assert_eq!(row_project(&x, 5).unwrap(), x);
        let mut one = DataMatrix::zeros(4);
        one.set(2, 1, 3.0);
        assert_eq!(row_project(&one, 1).unwrap(), one);
        // all-zero input: ties go to the first rows
        assert_eq!(row_project(&DataMatrix::zeros(3), 2).unwrap(), DataMatrix::zeros(3));
        assert!(row_project(&x, 0).is_err());
    }

    #[test]
    fn row_project_is_optimal_by_enumeration() {
        for seed in 0..50 {
            let p = 3 + (seed % 6) as usize;
            let k = 1 + (seed as usize / 3) % p;
            let x = random_matrix(seed, p);
            let kept = |m: &DataMatrix| m.as_slice().iter().map(|v| v * v).sum::<f64>();
            let got = row_project(&x, k).unwrap();
            let rows_kept = (0..p).filter(|&i| got.row(i).iter().any(|v| *v != 0.0)).count();
            assert!(rows_kept <= k);
            let mut best = 0.0f64;
            for mask in 0u32..(1 << p) {
                if mask.count_ones() as usize == k {
                    let s: f64 = (0..p).filter(|i| mask >> i & 1 == 1).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>()).sum();
                    best = best.max(s);
                }
            }
            assert!(kept(&got) >= best * (1.0 - 1e-12));
        }
    }

    #[test]
    fn schatten_examples() {
        let k = 5;
        let id = DataMatrix::from_fn(k, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!((schatten(&id, 2.0).unwrap() - (k as f64).sqrt()).abs() < 1e-12);
        assert_eq!(schatten(&DataMatrix::zeros(3), 3.0).unwrap(), 0.0);
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.3, 1.0, -1.0, 2.0];
        let a = DataMatrix::from_fn(4, |i, j| u[i] * v[j]);
        let expect = u.iter().map(|x| x * x).sum::<f64>().sqrt() * v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((schatten(&a, q).unwrap() - expect).abs() < 1e-10 * expect, "q = {q}");
        }
        assert!(schatten(&a, 0.5).is_err());
    }

    #[test]
    fn spectral_and_frobenius_agree_with_svd() {
        let a = random_matrix(7, 8);
        let s = singular_values(&a).unwrap();
        let fro = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((SchattenNorm::new(2.0).unwrap().of_values(&s) - fro).abs() < 1e-10 * fro);
        assert_eq!(schatten(&a, f64::INFINITY).unwrap(), s[0]);
    }

    #[test]
    fn block_mean_norms_dominate_k_lambda() {
        let (k, lam) = (4, 0.7);
        let th = MeanMatrixSpec::leading_block(9, k, lam).unwrap().dense();
        let spec = schatten(&th, f64::INFINITY).unwrap();
        assert!((spec - k as f64 * lam).abs() < 1e-10);
        for q in [1.0, 2.0, 4.0] {
            assert!(schatten(&th, q).unwrap() >= spec - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn triangle_inequality(seed in any::<u64>(), q in prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(f64::INFINITY)]) {
            let a = random_matrix(seed, 5);
            let b = random_matrix(seed ^ 0xABCD, 5);
            let mut c = a.clone();
            for (x, y) in c.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
            prop_assert!(schatten(&c, q).unwrap() <= (schatten(&a, q).unwrap() + schatten(&b, q).unwrap()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn identity_estimator_risk_is_p_squared() {
        let p = 10;
        let r = risk_estimate(|x| Ok(x.clone()), &MeanMatrixSpec::zero(p), 2.0, 2000, 3).unwrap();
        assert!((r.mean - (p * p) as f64).abs() < 4.0 * r.se, "{r:?}");
    }

    #[test]
    fn rate_helpers() {
        let (p, k) = (64, 4);
        let l = (std::f64::consts::E * 16.0).ln();
        assert!((minimax_rate(p, k, 2.0) - (16.0 + 4.0 * l)).abs() < 1e-12);
        assert!((minimax_rate(p, k, 1.0) - (64.0 + 16.0 * l)).abs() < 1e-12);
        assert!((frobenius_rate(p, k) - 16.0 * l).abs() < 1e-12);
        assert_eq!(schatten_rank_factor(4, 1.0), 2.0);
        assert_eq!(schatten_rank_factor(4, 4.0), 1.0);
    }
}
