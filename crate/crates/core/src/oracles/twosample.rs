//! Goodness-of-fit and two-sample tests returning p-values.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `P{K > x}` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // theta-function form converges fast for small x
        let mut s = 0.0;
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * c).exp();
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the Stephens small-sample correction.
fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    ks_pvalue(ks_statistic(samples, cdf), samples.len() as f64)
}

pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    ks_pvalue(ks_two_sample_statistic(a, b), n * m / (n + m))
}

/// Pearson goodness-of-fit of observed counts against expected probabilities.
/// Bins with expected count below 5 are pooled into their right neighbour.
pub fn chi2_goodness_of_fit(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        o += c as f64;
        e += p * n as f64;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    chi2_pvalue(&pooled, pooled.len().saturating_sub(1))
}

/// Two-sample chi-square homogeneity test over shared categories.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut ca, mut cb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ca += x as f64;
        cb += y as f64;
        let tot = ca + cb;
        if tot * na.min(nb) / (na + nb) >= 5.0 {
            let ea = tot * na / (na + nb);
            let eb = tot * nb / (na + nb);
            stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
            bins += 1;
            ca = 0.0;
            cb = 0.0;
        }
    }
    if bins < 2 {
        return 1.0;
    }
    ChiSquared::new((bins - 1) as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
}

fn chi2_pvalue(pairs: &[(f64, f64)], dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let stat: f64 = pairs.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use crate::rng::StreamKey;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut r = StreamKey::new(seed).rng();
        (0..n).map(|_| shift + r.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn kolmogorov_reference_values() {
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(0.8) - 0.5441).abs() < 1e-3);
        // both series agree at the switch point
        let below = kolmogorov_sf(1.0 - 1e-12);
        assert!((below - kolmogorov_sf(1.0)).abs() < 1e-9);
    }

    #[test]
    fn detects_a_half_sd_shift() {
        assert!(ks_two_sample(&normals(1, 10_000, 0.0), &normals(2, 10_000, 0.5)) < 0.01);
        assert!(ks_one_sample(&normals(3, 10_000, 0.5), normal::cdf) < 0.01);
    }

    #[test]
    fn null_pvalues_are_uniform() {
        let pv: Vec<f64> = (0..200).map(|s| ks_two_sample(&normals(2 * s, 1000, 0.0), &normals(2 * s + 1, 1000, 0.0))).collect();
        assert!(ks_one_sample(&pv, |x| x.clamp(0.0, 1.0)) > 0.001);
    }

    #[test]
    fn chi2_tests() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        assert!(chi2_goodness_of_fit(&[100, 200, 300, 400], &probs) > 0.99);
        assert!(chi2_goodness_of_fit(&[400, 300, 200, 100], &probs) < 1e-10);
        assert!(chi2_two_sample(&[100, 200, 300], &[98, 205, 297]) > 0.5);
        assert!(chi2_two_sample(&[300, 200, 100], &[100, 200, 300]) < 1e-10);
    }
}
