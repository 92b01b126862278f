//! The truncated densities that turn graph bits into Gaussian-like entries.
//!
//! ```text
//! f1(x) = c1 phi(x - mu) 1{|x| <= M}
//! f0(x) = [2 c0 phi(x) - c1 phi(x - mu)] 1{|x| <= M}
//! (f0 + f1) / 2 = c0 phi(x) 1{|x| <= M}
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Proposal cap for every rejection loop.
pub const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedPair {
    pub m: f64,
    pub mu: f64,
    pub c0: f64,
    pub c1: f64,
}

/// Which of the two truncated laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    F0,
    F1,
}

impl TruncatedPair {
    pub fn new(m: f64, mu: f64) -> Result<Self> {
        if !(m.is_finite() && m >= 3.0) {
            return Err(Error::InvalidParameter(format!("truncation level M = {m} must be at least 3")));
        }
        if !(mu > 0.0 && mu <= 1.0 / (2.0 * m) * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("mean shift mu = {mu} must lie in (0, 1/(2M)]")));
        }
        let c0 = 1.0 / normal::interval(-m, m);
        let c1 = 1.0 / normal::interval(-m - mu, m - mu);
        Ok(TruncatedPair { m, mu, c0, c1 })
    }

    /// `M = sqrt(6 ln n)`, `mu = 1/(2M)`.
    pub fn for_graph_size(n: usize) -> Result<Self> {
        let m = (6.0 * (n as f64).ln()).sqrt();
        Self::new(m, 1.0 / (2.0 * m))
    }

    pub fn f0(&self, x: f64) -> f64 {
        if x.abs() > self.m {
            return 0.0;
        }
        2.0 * self.c0 * normal::pdf(x) - self.c1 * normal::pdf(x - self.mu)
    }

    pub fn f1(&self, x: f64) -> f64 {
        if x.abs() > self.m {
            return 0.0;
        }
        self.c1 * normal::pdf(x - self.mu)
    }

    pub fn density(&self, b: Branch, x: f64) -> f64 {
        match b {
            Branch::F0 => self.f0(x),
            Branch::F1 => self.f1(x),
        }
    }

    /// `c0 phi(x) 1{|x| <= M}`.
    pub fn mixture(&self, x: f64) -> f64 {
        if x.abs() > self.m {
            return 0.0;
        }
        self.c0 * normal::pdf(x)
    }

    /// Probability of `(a, b]` under the branch.
    pub fn mass(&self, br: Branch, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(-self.m), b.min(self.m));
        if b <= a {
            return 0.0;
        }
        let shifted = self.c1 * normal::interval(a - self.mu, b - self.mu);
        match br {
            Branch::F1 => shifted,
            Branch::F0 => (2.0 * self.c0 * normal::interval(a, b) - shifted).max(0.0),
        }
    }

    pub fn cdf(&self, br: Branch, x: f64) -> f64 {
        if x >= self.m {
            return 1.0;
        }
        self.mass(br, -self.m, x).min(1.0)
    }

    pub fn mean(&self, br: Branch) -> f64 {
        // E[Z 1{a<Z<=b}] for Z ~ N(s, 1) is s P + phi(a - s) - phi(b - s)
        let m = self.m;
        let e1 = self.c1 * (self.mu * normal::interval(-m - self.mu, m - self.mu) + normal::pdf(-m - self.mu) - normal::pdf(m - self.mu));
        match br {
            Branch::F1 => e1,
            Branch::F0 => -e1,
        }
    }

    /// Centered truncated normal, by rejection from N(0, 1).
    pub fn sample_mixture(&self, rng: &mut impl Rng) -> Result<f64> {
        for _ in 0..REJECTION_CAP {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= self.m {
                return Ok(z);
            }
        }
        Err(Error::RejectionCapExceeded(REJECTION_CAP))
    }

    pub fn sample_f1(&self, rng: &mut impl Rng) -> Result<f64> {
        for _ in 0..REJECTION_CAP {
            let z: f64 = self.mu + rng.sample::<f64, _>(StandardNormal);
            if z.abs() <= self.m {
                return Ok(z);
            }
        }
        Err(Error::RejectionCapExceeded(REJECTION_CAP))
    }

    /// Proposes from the mixture and accepts with `f0 / (2 c0 phi)`.
    pub fn sample_f0(&self, rng: &mut impl Rng) -> Result<f64> {
        for _ in 0..REJECTION_CAP {
            let x = self.sample_mixture(rng)?;
            let accept = 1.0 - self.c1 * normal::pdf(x - self.mu) / (2.0 * self.c0 * normal::pdf(x));
            if rng.gen::<f64>() < accept {
                return Ok(x);
            }
        }
        Err(Error::RejectionCapExceeded(REJECTION_CAP))
    }

    pub fn sample(&self, br: Branch, rng: &mut impl Rng) -> Result<f64> {
        match br {
            Branch::F0 => self.sample_f0(rng),
            Branch::F1 => self.sample_f1(rng),
        }
    }

    /// `TV(F1, N(mu, 1)) = sf(M - mu) + sf(M + mu)`.
    pub fn tv_f1_shifted_normal(&self) -> f64 {
        normal::sf(self.m - self.mu) + normal::sf(self.m + self.mu)
    }

    /// `TV((F0 + F1)/2, N(0, 1)) = 2 sf(M)`.
    pub fn tv_mixture_normal(&self) -> f64 {
        2.0 * normal::sf(self.m)
    }

    pub fn tv_f1_bound(&self) -> f64 {
        ((1.0 - self.m * self.m) / 2.0).exp()
    }

    pub fn tv_mixture_bound(&self) -> f64 {
        (-self.m * self.m / 2.0).exp()
    }
}
