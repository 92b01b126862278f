//! Standard normal density, distribution and tail functions.

use statrs::function::gamma::ln_gamma;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of N(0, 1).
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail `P{Z > x}`.
///
/// Uses the complementary error function up to x = 37.5 and the asymptotic
/// series beyond, where the value is already below the f64 normal range.
pub fn sf(x: f64) -> f64 {
    if x > 37.5 {
        let x2 = x * x;
        return pdf(x) / x * (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
    }
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `P{Z <= x}`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    sf(-x)
}

/// `P{a < Z <= b}` computed on the side of zero that avoids cancellation.
pub fn interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let v = if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        sf(-b) - sf(-a)
    } else {
        1.0 - sf(-a) - sf(b)
    };
    v.max(0.0)
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    assert!(k <= n, "k must not exceed n");
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Exact `C(n, k)`, saturating at `u128::MAX`.
pub fn choose_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is integral; cancel the common factor with
        // the numerator first, the remaining denominator then divides acc
        let num = u128::from(n - i);
        let g = gcd(num, u128::from(i + 1));
        let d = u128::from(i + 1) / g;
        match (acc / d).checked_mul(num / g) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Phi(1) - Phi(0)
        assert!((interval(0.0, 1.0) - 0.341_344_746_068_542_9).abs() < 1e-15);
        assert!((sf(3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
        assert!((sf(10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-13);
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn asymptotic_branch_is_continuous() {
        let below = 0.5 * libm::erfc(37.5 / std::f64::consts::SQRT_2);
        let above = sf(37.500_000_001);
        assert!(below > 0.0);
        assert!((above / below - 1.0).abs() < 1e-6);
    }

    #[test]
    fn choose_matches_small_table() {
        assert_eq!(choose_u128(6, 2), 15);
        assert_eq!(choose_u128(24, 3), 2024);
        assert_eq!(choose_u128(50, 10), 10_272_278_170);
        assert_eq!(choose_u128(3, 5), 0);
        assert!((ln_choose(10, 1) - 10f64.ln()).abs() < 1e-13);
    }
}
