//! Adaptive Gauss-Kronrod (7/15) quadrature and density TV.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_INTERVALS: usize = 20_000;
const INITIAL_PIECES: usize = 32;

/// Kronrod estimate and |Kronrod - Gauss| on one interval.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `int_a^b f` to absolute tolerance `tol` by global bisection of the
/// worst interval.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("infinite interval [{a}, {b}]")));
    }
    if b <= a {
        return Ok(0.0);
    }
    // a coarse initial partition keeps narrow peaks from slipping between nodes
    let step = (b - a) / INITIAL_PIECES as f64;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..INITIAL_PIECES)
        .map(|i| {
            let lo = a + step * i as f64;
            let hi = if i + 1 == INITIAL_PIECES { b } else { lo + step };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= tol {
            return Ok(parts.iter().map(|p| p.2).sum());
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!("error estimate {total_err:e} above {tol:e} after {MAX_INTERVALS} intervals")));
        }
        let (idx, _) = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature(format!("interval [{lo}, {hi}] cannot be split further")));
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Sign changes of `h` on `[a, b]`, located by bisection from a uniform scan.
pub fn sign_changes(h: impl Fn(f64) -> f64, a: f64, b: f64, scan: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = (b - a) / scan as f64;
    let mut x0 = a;
    let mut h0 = h(a);
    for i in 1..=scan {
        let x1 = if i == scan { b } else { a + step * i as f64 };
        let h1 = h(x1);
        if (h0 < 0.0 && h1 > 0.0) || (h0 > 0.0 && h1 < 0.0) {
            let (mut lo, mut hi, mut hlo) = (x0, x1, h0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let hm = h(mid);
                if (hm < 0.0) == (hlo < 0.0) {
                    lo = mid;
                    hlo = hm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        h0 = h1;
    }
    roots
}

/// `(1/2) int |f - g|` over `[a, b]`, split at `breaks` and at the sign
/// changes of `f - g`.
pub fn tv_density(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.sort_by(f64::total_cmp);
    let mut knots = cuts.clone();
    for w in cuts.windows(2) {
        knots.extend(sign_changes(|x| f(x) - g(x), w[0], w[1], 512));
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let pieces = (knots.len() - 1).max(1) as f64;
    let mut total = 0.0;
    for w in knots.windows(2) {
        // one-sided limits at the cut points are never evaluated by GK nodes
        total += integrate(|x| (f(x) - g(x)).abs(), w[0], w[1], tol / pieces)?;
    }
    Ok(0.5 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;

    #[test]
    fn integrates_polynomials_and_gaussians() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-13).unwrap();
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-12);
        let v = integrate(normal::pdf, -8.0, 8.0, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_of_equal_densities_is_zero() {
        assert_eq!(tv_density(normal::pdf, normal::pdf, -10.0, 10.0, &[], 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn tv_of_shifted_normals() {
        let tv = tv_density(normal::pdf, |x| normal::pdf(x - 1.0), -40.0, 41.0, &[], 1e-12).unwrap();
        assert!((tv - (2.0 * normal::cdf(0.5) - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn tv_is_symmetric_and_triangular() {
        let f = |x: f64| normal::pdf(x);
        let g = |x: f64| normal::pdf((x - 0.3) / 1.2) / 1.2;
        let h = |x: f64| 0.5 * normal::pdf(x + 1.0) + 0.5 * normal::pdf(x - 1.0);
        let d = |a: &dyn Fn(f64) -> f64, b: &dyn Fn(f64) -> f64| tv_density(a, b, -40.0, 40.0, &[], 1e-12).unwrap();
        assert!((d(&f, &g) - d(&g, &f)).abs() < 1e-11);
        assert!(d(&f, &h) <= d(&f, &g) + d(&g, &h) + 1e-11);
    }
}
