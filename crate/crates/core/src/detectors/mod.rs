//! Linear, scan and maximum tests with their analytic error bounds, the
//! support-recovery test and the `(alpha, beta)` regime classifier.

mod scan;

pub use scan::{block_sum, t_scan, ScanBudget, ScanResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::normal::ln_choose;

/// Default constant `c` in the scan and max thresholds.
pub const DEFAULT_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
}

impl TestOutcome {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        TestOutcome { statistic, threshold, reject: statistic > threshold }
    }
}

/// `(1/p) sum_ij X_ij`.
pub fn t_lin(x: &DataMatrix) -> f64 {
    let p = x.dim();
    if p == 0 {
        return 0.0;
    }
    x.as_slice().iter().sum::<f64>() / p as f64
}

/// `max_ij X_ij`.
pub fn t_max(x: &DataMatrix) -> f64 {
    x.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `lambda k^2 / 2p`
    pub lin: f64,
    /// `sqrt((4 + c) log C(p, k))`
    pub scan: f64,
    /// `sqrt((4 + c) log p)`
    pub max: f64,
}

pub fn thresholds(p: usize, k: usize, lambda: f64, c: f64) -> Thresholds {
    assert!(k >= 1 && k <= p && c > 0.0, "need 1 <= k <= p and c > 0");
    let (pf, kf) = (p as f64, k as f64);
    Thresholds {
        lin: lambda * kf * kf / (2.0 * pf),
        scan: ((4.0 + c) * ln_choose(p as u64, k as u64)).sqrt(),
        max: ((4.0 + c) * pf.ln()).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
    pub c: f64,
    pub bound_lin: f64,
    pub bound_scan: f64,
    pub bound_max: f64,
    /// Unclipped values, kept for diagnostics.
    pub raw_lin: f64,
    pub raw_scan: f64,
    pub raw_max: f64,
}

/// Type-I+II error bounds of the three tests at their default thresholds.
pub fn error_bounds(p: usize, k: usize, lambda: f64, c: f64) -> ErrorBoundReport {
    let th = thresholds(p, k, lambda, c);
    let (pf, kf) = (p as f64, k as f64);
    let pos = |v: f64| v.max(0.0);
    let raw_lin = (-(lambda * lambda * kf.powi(4)) / (8.0 * pf * pf)).exp();
    let raw_scan = (-c / 2.0 * ln_choose(p as u64, k as u64)).exp() + (-0.5 * pos(lambda * kf - th.scan).powi(2)).exp();
    let raw_max = pf.powf(-c / 2.0) + (-0.5 * pos(lambda - th.max).powi(2)).exp();
    ErrorBoundReport {
        p,
        k,
        lambda,
        c,
        bound_lin: raw_lin.min(1.0),
        bound_scan: raw_scan.min(1.0),
        bound_max: raw_max.min(1.0),
        raw_lin,
        raw_scan,
        raw_max,
    }
}

/// Rejects when `(1/k) sum_{rows x cols} X` exceeds `tau`.
///
/// The `1/k` scaling matches [`t_scan`], so the statistic never exceeds the
/// scan statistic computed on the same matrix.
pub fn support_recovery_test(x: &DataMatrix, rows: &[usize], cols: &[usize], tau: f64) -> Result<TestOutcome> {
    if rows.len() != cols.len() || rows.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "support estimates must both have size k >= 1, got {} and {}",
            rows.len(),
            cols.len()
        )));
    }
    let p = x.dim();
    let mut r = rows.to_vec();
    let mut c = cols.to_vec();
    r.sort_unstable();
    c.sort_unstable();
    for v in r.iter().chain(c.iter()) {
        if *v >= p {
            return Err(Error::IndexOutOfRange { index: *v, dim: p });
        }
    }
    if r.windows(2).any(|w| w[0] == w[1]) || c.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("support estimates contain duplicates".into()));
    }
    let k = r.len() as f64;
    Ok(TestOutcome::new(block_sum(x, &r, &c) / k, tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    StatisticallyImpossible,
    PolyTimeEasy,
    HardUnderPc,
    Boundary,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::StatisticallyImpossible => "statistically-impossible",
            Regime::PolyTimeEasy => "poly-time-easy",
            Regime::HardUnderPc => "hard-under-pc",
            Regime::Boundary => "boundary",
        };
        f.write_str(s)
    }
}

/// Statistical boundary `alpha/2 v (2 alpha - 1)`.
pub fn beta_star(alpha: f64) -> f64 {
    (alpha / 2.0).max(2.0 * alpha - 1.0)
}

/// Polynomial-time boundary `0 v (2 alpha - 1)`.
pub fn beta_sharp(alpha: f64) -> f64 {
    (2.0 * alpha - 1.0).max(0.0)
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Region of `(alpha, beta)` for `k = p^alpha`, `lambda = p^-beta`.
pub fn regime(alpha: f64, beta: f64) -> Result<Regime> {
    if !(alpha > 0.0 && alpha < 1.0) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("need alpha in (0,1) and beta in [0,1], got ({alpha}, {beta})")));
    }
    let (bs, bh) = (beta_star(alpha), beta_sharp(alpha));
    if (beta - bs).abs() <= BOUNDARY_TOL || (beta - bh).abs() <= BOUNDARY_TOL {
        return Ok(Regime::Boundary);
    }
    Ok(if beta > bs {
        Regime::StatisticallyImpossible
    } else if beta < bh {
        Regime::PolyTimeEasy
    } else {
        Regime::HardUnderPc
    })
}
