//! Independent numerical checks: exact discrete TV, quadrature TV, FFT
//! convolution, Monte Carlo error rates and goodness-of-fit tests.

pub mod conv;
pub mod quad;
pub mod twosample;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use conv::{null_entry_law, truncated_variance, GriddedLaw, DEFAULT_GRID};
pub use quad::{integrate, tv_density};

use crate::detectors::block_sum;
use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::rng::StreamKey;

/// Finite distribution on sorted real atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<f64>,
    masses: Vec<f64>,
}

pub const MASS_TOLERANCE: f64 = 1e-12;

impl DiscreteDist {
    pub fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if atoms.len() != masses.len() || atoms.is_empty() {
            return Err(Error::ShapeMismatch { expected: format!("{} masses", atoms.len()), found: format!("{}", masses.len()) });
        }
        if atoms.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("atoms must be strictly increasing".into()));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidParameter("masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter(format!("masses sum to {total}, not 1")));
        }
        Ok(DiscreteDist { atoms, masses })
    }

    /// Sorts and merges repeated atoms.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut masses: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, m) in pairs {
            if atoms.last() == Some(&a) {
                *masses.last_mut().expect("paired") += m;
            } else {
                atoms.push(a);
                masses.push(m);
            }
        }
        Self::new(atoms, masses)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        match self.atoms.binary_search_by(|a| a.total_cmp(&x)) {
            Ok(i) => self.masses[i],
            Err(_) => 0.0,
        }
    }
}

/// `(1/2) sum |p(x) - q(x)|` over the union of supports.
pub fn tv_discrete(p: &DiscreteDist, q: &DiscreteDist) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    while i < p.len() || j < q.len() {
        let ord = match (p.atoms.get(i), q.atoms.get(j)) {
            (Some(a), Some(b)) => a.total_cmp(b),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                s += p.masses[i];
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                s += q.masses[j];
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                s += (p.masses[i] - q.masses[j]).abs();
                i += 1;
                j += 1;
            }
        }
    }
    0.5 * s
}

/// Exact TV between the products `P_1 x ... x P_n` and `Q_1 x ... x Q_n`,
/// enumerating every atom tuple.
pub fn tv_product(ps: &[DiscreteDist], qs: &[DiscreteDist]) -> Result<f64> {
    if ps.len() != qs.len() || ps.is_empty() {
        return Err(Error::ShapeMismatch { expected: format!("{} factors", ps.len()), found: format!("{}", qs.len()) });
    }
    // per factor: union atoms with both mass vectors
    let factors: Vec<(Vec<f64>, Vec<f64>)> = ps
        .iter()
        .zip(qs)
        .map(|(p, q)| {
            let mut u: Vec<f64> = p.atoms.iter().chain(&q.atoms).copied().collect();
            u.sort_by(f64::total_cmp);
            u.dedup();
            (u.iter().map(|&x| p.mass_at(x)).collect(), u.iter().map(|&x| q.mass_at(x)).collect())
        })
        .collect();
    let sizes: Vec<usize> = factors.iter().map(|f| f.0.len()).collect();
    let total: usize = sizes.iter().product();
    if total > 1 << 24 {
        return Err(Error::InvalidParameter(format!("{total} product atoms is too many to enumerate")));
    }
    let mut idx = vec![0usize; sizes.len()];
    let mut s = 0.0;
    for _ in 0..total {
        let (mut pm, mut qm) = (1.0, 1.0);
        for (f, &i) in factors.iter().zip(&idx) {
            pm *= f.0[i];
            qm *= f.1[i];
        }
        s += (pm - qm).abs();
        for (d, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < sizes[d] {
                break;
            }
            *i = 0;
        }
    }
    Ok(0.5 * s)
}

/// All `k`-subsets of `0..p` in lexicographic order.
pub fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..p {
            if p - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, p, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= p {
        rec(0, p, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Scan statistic by enumerating all `C(p,k)^2` row and column subsets.
/// Returns `(max block sum / k, rows, cols)`, first maximizer in
/// lexicographic order.
pub fn scan_brute_force(x: &DataMatrix, k: usize) -> (f64, Vec<usize>, Vec<usize>) {
    let all = subsets(x.dim(), k);
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    for s in &all {
        for t in &all {
            let v = block_sum(x, s, t);
            if v > best.0 {
                best = (v, s.clone(), t.clone());
            }
        }
    }
    (best.0 / k as f64, best.1, best.2)
}

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Bernoulli Monte Carlo estimate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub trials: u64,
    pub successes: u64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MCEstimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let n = trials as f64;
        let ph = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (ph + z2 / (2.0 * n)) / denom;
        let half = Z95 * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        MCEstimate { trials, successes, point: ph, ci_low: (centre - half).max(0.0).min(ph), ci_high: (centre + half).min(1.0).max(ph) }
    }

    /// Standard error implied by the Wilson interval width.
    pub fn se(&self) -> f64 {
        (self.ci_high - self.ci_low) / (2.0 * Z95)
    }
}

/// Standard error of a sum of two independent estimates.
pub fn combined_se(a: &MCEstimate, b: &MCEstimate) -> f64 {
    (a.se().powi(2) + b.se().powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub type1: MCEstimate,
    pub type2: MCEstimate,
}

impl ErrorRates {
    pub fn total(&self) -> f64 {
        self.type1.point + self.type2.point
    }

    pub fn se(&self) -> f64 {
        combined_se(&self.type1, &self.type2)
    }
}

/// Empirical Type-I (rejections under the null) and Type-II (acceptances
/// under the alternative). Trial `i` draws from `key.child(0).child(i)` for
/// the null and `key.child(1).child(i)` for the alternative.
pub fn mc_error<D, F, G0, G1>(test: F, null_gen: G0, alt_gen: G1, trials: u64, seed: u64) -> ErrorRates
where
    F: Fn(&D) -> bool + Sync,
    G0: Fn(StreamKey) -> D + Sync,
    G1: Fn(StreamKey) -> D + Sync,
{
    let key = StreamKey::new(seed);
    let rejections = |gen: &(dyn Fn(StreamKey) -> D + Sync), branch: u64| -> u64 {
        (0..trials).into_par_iter().filter(|&i| test(&gen(key.child(branch).child(i)))).count() as u64
    };
    let r0 = rejections(&null_gen, 0);
    let r1 = rejections(&alt_gen, 1);
    ErrorRates { type1: MCEstimate::new(r0, trials), type2: MCEstimate::new(trials - r1, trials) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_dist(rng: &mut impl Rng, max_atoms: usize) -> DiscreteDist {
        let n = rng.gen_range(1..=max_atoms);
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| (f64::from(rng.gen_range(0..6u8)), rng.gen::<f64>() + 1e-3)).collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        DiscreteDist::from_pairs(pairs.into_iter().map(|(a, m)| (a, m / total)).collect()).unwrap()
    }

    #[test]
    fn tv_discrete_examples() {
        let p = DiscreteDist::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let q = DiscreteDist::new(vec![2.0, 3.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(tv_discrete(&p, &p), 0.0);
        assert_eq!(tv_discrete(&p, &q), 1.0);
        let r = DiscreteDist::new(vec![0.0, 2.0], vec![0.75, 0.25]).unwrap();
        assert!((tv_discrete(&p, &r) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_tv_is_subadditive() {
        let mut rng = StreamKey::new(12).rng();
        for _ in 0..1000 {
            let n = rng.gen_range(1..=4);
            let ps: Vec<_> = (0..n).map(|_| random_dist(&mut rng, 4)).collect();
            let qs: Vec<_> = (0..n).map(|_| random_dist(&mut rng, 4)).collect();
            let lhs = tv_product(&ps, &qs).unwrap();
            let rhs: f64 = ps.iter().zip(&qs).map(|(p, q)| tv_discrete(p, q)).sum();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn single_factor_product_is_plain_tv() {
        let mut rng = StreamKey::new(3).rng();
        let p = random_dist(&mut rng, 5);
        let q = random_dist(&mut rng, 5);
        assert!((tv_product(std::slice::from_ref(&p), std::slice::from_ref(&q)).unwrap() - tv_discrete(&p, &q)).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_distributions() {
        assert!(DiscreteDist::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDist::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteDist::new(vec![0.0], vec![-0.0 - 1.0]).is_err());
    }

    #[test]
    fn wilson_interval_properties() {
        let e = MCEstimate::new(0, 100);
        assert_eq!(e.point, 0.0);
        assert!(e.ci_low == 0.0 && e.ci_high > 0.0);
        let e = MCEstimate::new(37, 100);
        assert!(e.ci_low <= e.point && e.point <= e.ci_high);
        // Wilson interval for 37/100 is [0.2818, 0.4678]
        assert!((e.ci_low - 0.2818).abs() < 1e-4 && (e.ci_high - 0.4678).abs() < 1e-4);
    }

    #[test]
    fn wilson_coverage_is_near_nominal() {
        let (p, n, reps) = (0.3, 200u64, 2000u64);
        let covered = (0..reps)
            .filter(|&r| {
                let mut rng = StreamKey::new(r).rng();
                let s = (0..n).filter(|_| rng.gen::<f64>() < p).count() as u64;
                let e = MCEstimate::new(s, n);
                e.ci_low <= p && p <= e.ci_high
            })
            .count() as f64
            / reps as f64;
        assert!((covered - 0.95).abs() < 0.02, "coverage {covered}");
    }

    #[test]
    fn always_reject_has_no_type2_error() {
        let r = mc_error(|_: &u64| true, |k| k.raw(), |k| k.raw(), 100, 1);
        assert_eq!(r.type1.point, 1.0);
        assert_eq!(r.type2.point, 0.0);
    }
}
