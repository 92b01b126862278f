//! Observation models: mean matrices, Gaussian sampling and the dyadic
//! quantizer `[x]_t = 2^-t floor(2^t x)`.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Largest scale accepted for a 64-bit mantissa.
pub const MAX_SCALE: u32 = 56;

/// Exact dyadic rational `mantissa * 2^-scale`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DyadicReal {
    mantissa: i64,
    scale: u32,
}

impl DyadicReal {
    pub fn new(mantissa: i64, scale: u32) -> Result<Self> {
        if scale > MAX_SCALE {
            return Err(Error::ScaleTooLarge { scale, max: MAX_SCALE });
        }
        Ok(DyadicReal { mantissa, scale })
    }

    pub fn mantissa(self) -> i64 {
        self.mantissa
    }

    pub fn scale(self) -> u32 {
        self.scale
    }

    /// Nearest f64; exact when `|mantissa| < 2^53`.
    pub fn to_f64(self) -> f64 {
        self.mantissa as f64 * (-(self.scale as f64)).exp2()
    }

    /// Same value with trailing zero bits removed from the mantissa.
    pub fn normalized(self) -> Self {
        if self.mantissa == 0 {
            return DyadicReal { mantissa: 0, scale: 0 };
        }
        let tz = self.mantissa.trailing_zeros().min(self.scale);
        DyadicReal { mantissa: self.mantissa >> tz, scale: self.scale - tz }
    }

    fn widened(self, scale: u32) -> i128 {
        i128::from(self.mantissa) << (scale - self.scale)
    }
}

impl PartialEq for DyadicReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for DyadicReal {}

impl Ord for DyadicReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let s = self.scale.max(other.scale);
        self.widened(s).cmp(&other.widened(s))
    }
}

impl PartialOrd for DyadicReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for DyadicReal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let n = self.normalized();
        n.mantissa.hash(state);
        n.scale.hash(state);
    }
}

/// Floor mantissa `floor(2^t x)`, the integer behind [`quantize`].
pub fn quantize_mantissa(x: f64, t: u32) -> Result<i64> {
    if t > MAX_SCALE {
        return Err(Error::ScaleTooLarge { scale: t, max: MAX_SCALE });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    // scaling by a power of two is exact, so the floor is exact too
    let y = (x * (t as f64).exp2()).floor();
    if y >= 9.223_372_036_854_775_807e18 || y < -9.223_372_036_854_775_808e18 {
        return Err(Error::MantissaOverflow { value: x, scale: t });
    }
    Ok(y as i64)
}

/// `[x]_t = 2^-t floor(2^t x)`.
pub fn quantize(x: f64, t: u32) -> Result<DyadicReal> {
    Ok(DyadicReal { mantissa: quantize_mantissa(x, t)?, scale: t })
}

/// Dense square real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn zeros(p: usize) -> Self {
        DataMatrix { p, data: vec![0.0; p * p] }
    }

    pub fn filled(p: usize, value: f64) -> Self {
        DataMatrix { p, data: vec![value; p * p] }
    }

    pub fn from_vec(p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != p * p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", p * p),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(DataMatrix { p, data })
    }

    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                data.push(f(i, j));
            }
        }
        DataMatrix { p, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sub(&self, other: &DataMatrix) -> DataMatrix {
        assert_eq!(self.p, other.p);
        DataMatrix {
            p: self.p,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn quantized(&self, t: u32) -> Result<QuantizedMatrix> {
        let mantissas = self.data.iter().map(|&x| quantize_mantissa(x, t)).collect::<Result<Vec<_>>>()?;
        Ok(QuantizedMatrix { p: self.p, t, mantissas })
    }
}

/// Square matrix of dyadic values sharing the scale `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedMatrix {
    p: usize,
    t: u32,
    mantissas: Vec<i64>,
}

impl QuantizedMatrix {
    pub fn from_mantissas(p: usize, t: u32, mantissas: Vec<i64>) -> Result<Self> {
        if t > MAX_SCALE {
            return Err(Error::ScaleTooLarge { scale: t, max: MAX_SCALE });
        }
        if mantissas.len() != p * p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", p * p),
                found: format!("{} entries", mantissas.len()),
            });
        }
        Ok(QuantizedMatrix { p, t, mantissas })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn scale(&self) -> u32 {
        self.t
    }

    pub fn mantissas(&self) -> &[i64] {
        &self.mantissas
    }

    pub fn get(&self, i: usize, j: usize) -> DyadicReal {
        DyadicReal { mantissa: self.mantissas[i * self.p + j], scale: self.t }
    }

    pub fn to_real(&self) -> DataMatrix {
        let s = (-(self.t as f64)).exp2();
        DataMatrix { p: self.p, data: self.mantissas.iter().map(|&m| m as f64 * s).collect() }
    }
}

/// Mean matrix supported on `rows x cols`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMatrixSpec {
    p: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    lambda: f64,
    /// Row-major `|rows| x |cols|` block values; `None` means constant `lambda`.
    values: Option<Vec<f64>>,
}

fn canonical_support(p: usize, idx: &[usize]) -> Result<Vec<usize>> {
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&last) = v.last() {
        if last >= p {
            return Err(Error::IndexOutOfRange { index: last, dim: p });
        }
    }
    Ok(v)
}

impl MeanMatrixSpec {
    /// Constant `lambda` on `rows x cols`, zero elsewhere.
    pub fn new(p: usize, rows: &[usize], cols: &[usize], lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(MeanMatrixSpec {
            p,
            rows: canonical_support(p, rows)?,
            cols: canonical_support(p, cols)?,
            lambda,
            values: None,
        })
    }

    /// The null mean.
    pub fn zero(p: usize) -> Self {
        MeanMatrixSpec { p, rows: vec![], cols: vec![], lambda: 0.0, values: None }
    }

    /// Square block on the first `k` rows and columns.
    pub fn leading_block(p: usize, k: usize, lambda: f64) -> Result<Self> {
        let idx: Vec<usize> = (0..k).collect();
        Self::new(p, &idx, &idx, lambda)
    }

    /// Per-cell values on the support; every value must be at least `lambda`.
    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self> {
        let n = self.rows.len() * self.cols.len();
        if values.len() != n {
            return Err(Error::ShapeMismatch { expected: format!("{n} values"), found: format!("{}", values.len()) });
        }
        if let Some(v) = values.iter().find(|&&v| !(v >= self.lambda)) {
            return Err(Error::InvalidParameter(format!("block value {v} below lambda {}", self.lambda)));
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dense(&self) -> DataMatrix {
        let mut m = DataMatrix::zeros(self.p);
        for (a, &i) in self.rows.iter().enumerate() {
            for (b, &j) in self.cols.iter().enumerate() {
                let v = match &self.values {
                    Some(vals) => vals[a * self.cols.len() + b],
                    None => self.lambda,
                };
                m.set(i, j, v);
            }
        }
        m
    }

    fn nonzero(&self) -> bool {
        !self.rows.is_empty() && !self.cols.is_empty()
    }

    /// Membership in `M(p, k, lambda)`.
    pub fn in_alternative(&self, k: usize) -> bool {
        self.rows.len() >= k && self.cols.len() >= k
    }

    /// Membership in the restricted alternative with `k <= |U|, |V| <= 20k`.
    pub fn in_restricted_alternative(&self, k: usize) -> bool {
        self.in_alternative(k) && self.rows.len() <= 20 * k && self.cols.len() <= 20 * k
    }

    /// Membership in `F(p, k)`: the support fits inside some k x k block.
    pub fn in_sparse_class(&self, k: usize) -> bool {
        !self.nonzero() || (self.rows.len() <= k && self.cols.len() <= k)
    }
}

#[inline]
fn standard_normal(key: StreamKey) -> f64 {
    StandardNormal.sample(&mut key.rng())
}

/// `X = theta + Z`, with `Z_ij` keyed by `(key, i, j)`.
pub fn sample_gaussian(theta: &MeanMatrixSpec, key: StreamKey) -> DataMatrix {
    let p = theta.dim();
    let mut m = theta.dense();
    m.as_mut_slice().par_chunks_mut(p.max(1)).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v += standard_normal(key.cell(i, j));
        }
    });
    m
}

/// `[X]_t` for `X` drawn as in [`sample_gaussian`] with the same key.
pub fn sample_discretized(theta: &MeanMatrixSpec, t: u32, key: StreamKey) -> Result<QuantizedMatrix> {
    sample_gaussian(theta, key).quantized(t)
}

/// Smallest `t` with `t >= (3 + eps) log2 p`, and the distance bound
/// `2 p^2 2^(-2t/3)` at that `t`.
pub fn theorem1_min_t(p: usize, eps: f64) -> (u32, f64) {
    assert!(p >= 1 && eps > 0.0, "need p >= 1 and eps > 0");
    let raw = (3.0 + eps) * (p as f64).log2();
    // absorb log2 rounding so exact integers stay put
    let t = (raw - 1e-9).ceil().max(0.0) as u32;
    let pf = p as f64;
    (t, 2.0 * pf * pf * (-2.0 * t as f64 / 3.0).exp2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.3, 2).unwrap().to_f64(), 0.25);
        assert_eq!(quantize(-0.3, 2).unwrap().to_f64(), -0.5);
        assert_eq!(quantize(1.0, 8).unwrap().to_f64(), 1.0);
    }

    #[test]
    fn quantize_errors() {
        assert!(matches!(quantize(1.0, 57), Err(Error::ScaleTooLarge { .. })));
        assert!(matches!(quantize(1e6, 56), Err(Error::MantissaOverflow { .. })));
        assert!(matches!(quantize(f64::NAN, 3), Err(Error::NonFinite(_))));
    }

    #[test]
    fn dyadic_equality_ignores_scale() {
        let a = DyadicReal::new(1, 1).unwrap();
        let b = DyadicReal::new(4, 3).unwrap();
        assert_eq!(a, b);
        assert!(DyadicReal::new(3, 3).unwrap() < a);
        use std::collections::HashSet;
        let s: HashSet<_> = [a, b].into_iter().collect();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn mean_matrix_examples() {
        let th = MeanMatrixSpec::new(4, &[0, 1], &[2, 3], 1.0).unwrap();
        let d = th.dense();
        assert_eq!(d.as_slice().iter().filter(|&&v| v == 1.0).count(), 4);
        assert_eq!(d.as_slice().iter().sum::<f64>(), 4.0);
        assert!(th.in_alternative(2));
        assert!(!th.in_alternative(3));
        let z = MeanMatrixSpec::new(4, &[], &[], 0.7).unwrap();
        assert!(z.dense().as_slice().iter().all(|&v| v == 0.0));
        assert!(MeanMatrixSpec::new(4, &[4], &[0], 1.0).is_err());
        assert!(MeanMatrixSpec::new(4, &[0], &[0], -1.0).is_err());
    }

    #[test]
    fn membership_nesting() {
        for (r, c) in [(2usize, 2usize), (3, 5), (1, 60), (45, 45)] {
            let rows: Vec<usize> = (0..r).collect();
            let cols: Vec<usize> = (0..c).collect();
            let th = MeanMatrixSpec::new(64, &rows, &cols, 1.0).unwrap();
            for k in 1..6 {
                if th.in_restricted_alternative(k) {
                    assert!(th.in_alternative(k));
                }
            }
        }
        for k in 0..5 {
            assert!(MeanMatrixSpec::zero(8).in_sparse_class(k));
        }
    }

    #[test]
    fn block_values_must_dominate_lambda() {
        let th = MeanMatrixSpec::new(3, &[0], &[0, 1], 1.0).unwrap();
        assert!(th.clone().with_values(vec![1.5, 0.5]).is_err());
        let th = th.with_values(vec![1.5, 2.0]).unwrap();
        assert_eq!(th.dense().get(0, 1), 2.0);
    }

    #[test]
    fn gaussian_moments() {
        let p = 1000;
        let x = sample_gaussian(&MeanMatrixSpec::zero(p), StreamKey::new(1));
        let n = (p * p) as f64;
        let mean = x.as_slice().iter().sum::<f64>() / n;
        let var = x.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        // sd of the sample variance is sqrt(2/n)
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn gaussian_block_mean() {
        let th = MeanMatrixSpec::leading_block(200, 100, 0.8).unwrap();
        let x = sample_gaussian(&th, StreamKey::new(2));
        let s: f64 = (0..100).flat_map(|i| (0..100).map(move |j| (i, j))).map(|(i, j)| x.get(i, j)).sum();
        assert!((s / 1e4 - 0.8).abs() < 4.0 / 100.0);
    }

    #[test]
    fn discretized_zero_cell_probability() {
        // t = 0: the atom 0 collects [0, 1), mass Phi(1) - Phi(0)
        let p = 700;
        let q = sample_discretized(&MeanMatrixSpec::zero(p), 0, StreamKey::new(9)).unwrap();
        let n = (p * p) as f64;
        let hits = q.mantissas().iter().filter(|&&m| m == 0).count() as f64;
        let target = crate::normal::interval(0.0, 1.0);
        assert!((hits / n - target).abs() < 4.0 * (target * (1.0 - target) / n).sqrt());
    }

    #[test]
    fn fine_discretization_is_close_to_continuous() {
        let p = 300;
        let q = sample_discretized(&MeanMatrixSpec::zero(p), 30, StreamKey::new(4)).unwrap();
        let vals = q.to_real().into_vec();
        let pv = crate::oracles::twosample::ks_one_sample(&vals, crate::normal::cdf);
        assert!(pv > 1e-3, "p-value {pv}");
    }

    #[test]
    fn discretized_is_quantized_gaussian() {
        let th = MeanMatrixSpec::leading_block(12, 3, 1.3).unwrap();
        for seed in 0..20 {
            let x = sample_gaussian(&th, StreamKey::new(seed));
            let q = sample_discretized(&th, 7, StreamKey::new(seed)).unwrap();
            assert_eq!(x.quantized(7).unwrap(), q);
        }
    }

    #[test]
    fn theorem1_examples() {
        assert_eq!(theorem1_min_t(16, 1.0).0, 16);
        let (t, b) = theorem1_min_t(1, 0.5);
        assert_eq!((t, b), (0, 2.0));
        let (t, b) = theorem1_min_t(64, 1.0);
        assert_eq!(t, 24);
        assert!((b - 0.125).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn quantizer_properties(x in -1.0e3f64..1.0e3, y in -1.0e3f64..1.0e3, t in 0u32..40) {
            let q = quantize(x, t).unwrap();
            let qv = q.to_f64();
            let step = (-(t as f64)).exp2();
            prop_assert!(qv <= x && x - qv < step);
            prop_assert_eq!(quantize(qv, t).unwrap(), q);
            if x <= y {
                prop_assert!(q <= quantize(y, t).unwrap());
            }
        }
    }
}
