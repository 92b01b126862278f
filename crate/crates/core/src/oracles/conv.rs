//! Law of one null entry of the continuous reduction by FFT convolution.
//!
//! Under the null every `B` entry is an independent draw from the centered
//! truncated normal `c0 phi 1{|x| <= M}`, and an output entry is
//! `(1/l) * (sum of l^2 such draws)`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::DiscreteDist;
use crate::error::{Error, Result};
use crate::normal;
use crate::reduction::TruncatedPair;

pub const DEFAULT_GRID: usize = 1 << 18;
pub const MAX_TERMS: usize = 64;

/// Gridded law of a null output entry.
#[derive(Debug, Clone)]
pub struct GriddedLaw {
    /// Spacing of the output grid; atom `i` stands for the cell
    /// `[x_i - h/2, x_i + h/2)`.
    pub h: f64,
    pub dist: DiscreteDist,
}

/// Masses of `c0 phi 1{|x|<=M}` on cells of width `step` centered at
/// `i * step`, for `i` in `-half..half`.
fn cell_masses(pair: &TruncatedPair, step: f64, half: i64) -> Vec<f64> {
    (-half..half)
        .map(|i| {
            let c = i as f64 * step;
            let (a, b) = ((c - 0.5 * step).max(-pair.m), (c + 0.5 * step).min(pair.m));
            if b <= a {
                0.0
            } else {
                pair.c0 * normal::interval(a, b)
            }
        })
        .collect()
}

/// `grid` points spanning `[-(M+1) l, (M+1) l]` in output units.
pub fn null_entry_law(pair: &TruncatedPair, ell: usize, grid: usize) -> Result<GriddedLaw> {
    if ell == 0 || ell * ell > MAX_TERMS {
        return Err(Error::InvalidParameter(format!("l^2 = {} outside the convolution budget 1..={MAX_TERMS}", ell * ell)));
    }
    if grid < 16 || !grid.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("grid size {grid} must be a power of two >= 16")));
    }
    let l = ell as f64;
    let h = 2.0 * (pair.m + 1.0) * l / grid as f64;
    let half = (grid / 2) as i64;
    // the sum lives on the lattice of spacing l h, which maps to h after division by l
    let base = cell_masses(pair, l * h, half);
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); grid];
    // circular layout: index i >= 0 at i, negative i at grid + i
    for (k, &m) in base.iter().enumerate() {
        let i = k as i64 - half;
        buf[i.rem_euclid(grid as i64) as usize] = Complex::new(m, 0.0);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(grid).process(&mut buf);
    let power = (ell * ell) as i32;
    for z in buf.iter_mut() {
        *z = z.powi(power);
    }
    planner.plan_fft_inverse(grid).process(&mut buf);
    let mut masses = vec![0.0; grid];
    let mut atoms = vec![0.0; grid];
    for (k, (m, a)) in masses.iter_mut().zip(atoms.iter_mut()).enumerate() {
        let i = k as i64 - half;
        *a = i as f64 * h;
        *m = (buf[i.rem_euclid(grid as i64) as usize].re / grid as f64).max(0.0);
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    Ok(GriddedLaw { h, dist: DiscreteDist::new(atoms, masses)? })
}

impl GriddedLaw {
    /// `(1/2) sum |p_i - N(0,1)(cell_i)|` plus half the normal mass outside
    /// the grid.
    pub fn tv_to_standard_normal(&self) -> f64 {
        let h = self.h;
        let atoms = self.dist.atoms();
        let mut s = 0.0;
        for (&x, &m) in atoms.iter().zip(self.dist.masses()) {
            s += (m - normal::interval(x - 0.5 * h, x + 0.5 * h)).abs();
        }
        let lo = atoms[0] - 0.5 * h;
        let hi = atoms[atoms.len() - 1] + 0.5 * h;
        0.5 * (s + normal::cdf(lo) + normal::sf(hi))
    }

    pub fn mean(&self) -> f64 {
        self.dist.atoms().iter().zip(self.dist.masses()).map(|(x, m)| x * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.dist.atoms().iter().zip(self.dist.masses()).map(|(x, m)| (x - mu).powi(2) * m).sum()
    }
}

/// Variance of the centered normal truncated to `[-M, M]`.
pub fn truncated_variance(m: f64) -> f64 {
    1.0 - 2.0 * m * normal::pdf(m) / normal::interval(-m, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_is_the_cell_law() {
        let pair = TruncatedPair::new(3.0, 1.0 / 6.0).unwrap();
        let law = null_entry_law(&pair, 1, 1 << 12).unwrap();
        let direct = cell_masses(&pair, law.h, 1 << 11);
        for (a, b) in law.dist.masses().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_match_truncated_normal() {
        let pair = TruncatedPair::for_graph_size(32).unwrap();
        let law = null_entry_law(&pair, 2, 1 << 16).unwrap();
        assert!(law.mean().abs() < 1e-9);
        // cell rounding of each term adds (l h)^2 / 12 per term, h^2 l^2 / 12 after scaling
        let slack = (law.h * 2.0).powi(2) / 12.0 + 1e-8;
        assert!((law.variance() - truncated_variance(pair.m)).abs() < slack);
    }

    #[test]
    fn doubling_the_grid_changes_little() {
        let pair = TruncatedPair::for_graph_size(32).unwrap();
        let a = null_entry_law(&pair, 2, 1 << 15).unwrap().tv_to_standard_normal();
        let b = null_entry_law(&pair, 2, 1 << 16).unwrap().tv_to_standard_normal();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn rejects_large_block_counts() {
        let pair = TruncatedPair::new(3.0, 0.1).unwrap();
        assert!(null_entry_law(&pair, 9, 1 << 10).is_err());
        assert!(null_entry_law(&pair, 2, 1000).is_err());
    }
}
