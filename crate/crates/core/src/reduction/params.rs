use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MAX_SCALE;

/// Largest coin draw per sample (one `u128`).
pub const MAX_COIN_WIDTH: u32 = 127;

fn ceil_log2(x: usize) -> u32 {
    assert!(x >= 1);
    usize::BITS - (x - 1).leading_zeros()
}

/// How the atom resolution `w` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WChoice {
    /// `16 ceil(log2 p)`.
    Auto,
    /// The smallest `w` with `w >= t + 6 log2 N`.
    Minimal,
    Fixed(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
    pub kappa: usize,
    pub ell: usize,
    pub n: usize,
    pub n2: usize,
    pub m: f64,
    pub mu: f64,
    pub t: u32,
    pub w: u32,
    #[serde(rename = "T")]
    pub big_t: u32,
}

/// `2 p l sqrt(6 ln(2 p l))`, the left side of the defining inequality for `l`.
pub fn ell_cost(p: usize, ell: usize) -> f64 {
    let n = (2 * p * ell) as f64;
    n * (6.0 * n.ln()).sqrt()
}

/// Largest `l >= 1` with `ell_cost(p, l) <= p / lambda`.
pub fn largest_ell(p: usize, lambda: f64) -> Result<usize> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive and finite")));
    }
    let target = p as f64 / lambda;
    if ell_cost(p, 1) > target {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} exceeds 1/(2 sqrt(6 ln 2p)) = {}; no block count l >= 1 exists",
            1.0 / (2.0 * (6.0 * (2.0 * p as f64).ln()).sqrt())
        )));
    }
    let mut lo = 1usize;
    let mut hi = 2usize;
    while ell_cost(p, hi) <= target {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::InvalidParameter("block count overflow".into()))?;
    }
    // invariant: cost(lo) <= target < cost(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ell_cost(p, mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `ceil(log2 M) + w + ceil(3 log2 N)`.
pub fn coin_width(m: f64, w: u32, n: usize) -> u32 {
    m.log2().ceil() as u32 + w + (3.0 * (n as f64).log2()).ceil() as u32
}

pub fn default_t(p: usize) -> u32 {
    4 * ceil_log2(p)
}

pub fn default_w(p: usize) -> u32 {
    16 * ceil_log2(p)
}

/// `ceil(t + 6 log2 N)`.
pub fn minimal_w(t: u32, n: usize) -> u32 {
    t + (6.0 * (n as f64).log2()).ceil() as u32
}

impl ReductionParams {
    fn assemble(p: usize, k: usize, lambda: f64, ell: usize, t: u32, w: u32) -> Result<Self> {
        if t > MAX_SCALE {
            return Err(Error::ScaleTooLarge { scale: t, max: MAX_SCALE });
        }
        let n = 2 * p * ell;
        let m = (6.0 * (n as f64).ln()).sqrt();
        let big_t = coin_width(m, w, n);
        if big_t > MAX_COIN_WIDTH {
            return Err(Error::InvalidParameter(format!(
                "coin width T = {big_t} exceeds {MAX_COIN_WIDTH}; choose a smaller w (e.g. the minimal w = {})",
                minimal_w(t, n)
            )));
        }
        Ok(ReductionParams { p, k, lambda, kappa: 20 * k, ell, n, n2: p * ell, m, mu: 1.0 / (2.0 * m), t, w, big_t })
    }

    /// Parameters with every precondition of the hardness reduction enforced.
    pub fn choose(p: usize, k: usize, lambda: f64, t: Option<u32>, w: WChoice) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if p < 40 * k {
            return Err(Error::Precondition(format!("p = {p} must be at least 40k = {}", 40 * k)));
        }
        let ell = largest_ell(p, lambda)?;
        let t = t.unwrap_or_else(|| default_t(p));
        let n = 2 * p * ell;
        let w = match w {
            WChoice::Auto => default_w(p),
            WChoice::Minimal => minimal_w(t, n),
            WChoice::Fixed(w) => w,
        };
        if w < minimal_w(t, n) {
            return Err(Error::Precondition(format!("w = {w} is below t + 6 log2 N = {}", minimal_w(t, n))));
        }
        Self::assemble(p, k, lambda, ell, t, w)
    }

    /// Small-scale parameters that skip the `p >= 40k` and `w` conditions.
    ///
    /// `lambda` is set to the largest signal level for which `ell` is the
    /// block count the search would return.
    pub fn desk(p: usize, k: usize, ell: usize, t: u32, w: u32) -> Result<Self> {
        if p == 0 || k == 0 || k > p || ell == 0 {
            return Err(Error::InvalidParameter(format!("invalid desk parameters p={p} k={k} l={ell}")));
        }
        let lambda = p as f64 / ell_cost(p, ell) * (1.0 - 1e-12);
        Self::assemble(p, k, lambda, ell, t, w)
    }

    pub fn satisfies_w_condition(&self) -> bool {
        self.w >= minimal_w(self.t, self.n)
    }

    pub fn satisfies_size_condition(&self) -> bool {
        self.p >= 40 * self.k
    }
}

/// `40k (e/4)^(5k) + 2k exp(-4k ln(p / 20k))` and `10/p` from the end-to-end
/// guarantee of the composed test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionSlack {
    pub ten_over_p: f64,
    pub split_term: f64,
    pub collision_term: f64,
    pub total: f64,
}

pub fn composition_slack(p: usize, k: usize) -> CompositionSlack {
    let (pf, kf) = (p as f64, k as f64);
    let split_term = 40.0 * kf * (std::f64::consts::E / 4.0).powf(5.0 * kf);
    let collision_term = 2.0 * kf * (-4.0 * kf * (pf / (20.0 * kf)).ln()).exp();
    let ten_over_p = 10.0 / pf;
    CompositionSlack { ten_over_p, split_term, collision_term, total: ten_over_p + split_term + collision_term }
}
