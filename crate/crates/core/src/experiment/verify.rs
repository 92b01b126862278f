//! Self-checks shared by the `verify` command and the integration tests.
//!
//! Every check returns a [`Check`] with the observed quantity and the limit
//! it is compared against, so failures can be reported without panicking.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TestKind;
use crate::detectors::{error_bounds, t_lin, t_max, t_scan, thresholds, ScanBudget};
use crate::error::Result;
use crate::estimators::{default_threshold, frobenius_rate, risk_estimate, schatten, schatten_rank_factor, threshold_project};
use crate::model::{sample_gaussian, DataMatrix, MeanMatrixSpec};
use crate::normal;
use crate::oracles::twosample::ks_two_sample;
use crate::oracles::{mc_error, null_entry_law, scan_brute_force, tv_discrete, tv_product, DiscreteDist, MCEstimate, DEFAULT_GRID};
use crate::plantedclique::{event_e_failure_bound, fold_report, sample_clique_vertices, sample_er};
use crate::reduction::{
    bit_budget, largest_ell, quantized_law, reduce_continuous, Branch, DiscreteReducer, DyadicQ, QMode, ReductionParams, Rounding, TruncatedPair,
};
use crate::rng::{SeededCoins, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, observed: f64, limit: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, observed, limit, detail: detail.into() }
    }

    /// `observed <= limit`.
    fn at_most(name: impl Into<String>, observed: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self::new(name, observed <= limit, observed, limit, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Signal levels spanning every block count the search can return at `p`.
pub fn admissible_lambdas(p: usize) -> Vec<f64> {
    let top = 1.0 / (2.0 * (6.0 * (2.0 * p as f64).ln()).sqrt());
    (0..24).map(|j| top * 0.999 * 0.5f64.powi(j)).collect()
}

/// Both Gaussianization TV bounds for every `(M, mu)` reachable at `p`.
/// The inequalities are checked exactly, with no tolerance.
pub fn check_truncation_bounds(ps: &[usize]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut ok = true;
    for &p in ps {
        for lam in admissible_lambdas(p) {
            let ell = largest_ell(p, lam)?;
            let pair = TruncatedPair::for_graph_size(2 * p * ell)?;
            let (a, b) = (pair.tv_f1_shifted_normal(), pair.tv_f1_bound());
            let (c, d) = (pair.tv_mixture_normal(), pair.tv_mixture_bound());
            ok &= a <= b && c <= d;
            worst = worst.max(a / b).max(c / d);
            cases += 1;
        }
    }
    Ok(Check::new("truncation-tv-bounds", ok, worst, 1.0, format!("{cases} (M, mu) pairs; observed is the largest value/bound ratio")))
}

/// `max |(f0 + f1)/2 - c0 phi 1{|x| <= M}|` on an even grid over `[-M-1, M+1]`.
pub fn check_mixture_identity(ms: &[f64], points: usize) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &m in ms {
        let pair = TruncatedPair::new(m, 1.0 / (2.0 * m))?;
        let (lo, hi) = (-m - 1.0, m + 1.0);
        for i in 0..points {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let target = if x.abs() <= m { pair.c0 * normal::pdf(x) } else { 0.0 };
            worst = worst.max((pair.mixture(x) - target).abs());
        }
    }
    Ok(Check::at_most("mixture-identity", worst, 1e-12, format!("M in {ms:?}, {points} points each")))
}

/// Optimized exact scan against full enumeration on random matrices.
pub fn check_scan_oracle(count: u64, p: usize, k: usize, seed: u64) -> Result<Check> {
    let key = StreamKey::new(seed);
    let mismatches = (0..count)
        .into_par_iter()
        .map(|i| {
            let x = sample_gaussian(&MeanMatrixSpec::zero(p), key.child(i));
            let fast = t_scan(&x, k, ScanBudget::unlimited())?;
            let (v, _, _) = scan_brute_force(&x, k);
            Ok(u64::from(fast.statistic != v))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(Check::new("scan-oracle", mismatches == 0, mismatches as f64, 0.0, format!("{count} matrices, p={p}, k={k}; observed is the mismatch count")))
}

fn random_dist(rng: &mut impl Rng, max_atoms: usize) -> DiscreteDist {
    let n = rng.gen_range(1..=max_atoms);
    let pairs: Vec<(f64, f64)> = (0..n).map(|_| (f64::from(rng.gen_range(0..10u8)), rng.gen::<f64>() + 1e-3)).collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    DiscreteDist::from_pairs(pairs.into_iter().map(|(a, m)| (a, m / total)).collect()).expect("valid masses")
}

/// `TV(P1 x P2, Q1 x Q2) <= TV(P1, Q1) + TV(P2, Q2)` with exact TVs.
pub fn check_product_tv(count: u64, max_atoms: usize, seed: u64) -> Result<Check> {
    let key = StreamKey::new(seed);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..count {
        let mut rng = key.child(i).rng();
        let ps = vec![random_dist(&mut rng, max_atoms), random_dist(&mut rng, max_atoms)];
        let qs = vec![random_dist(&mut rng, max_atoms), random_dist(&mut rng, max_atoms)];
        let lhs = tv_product(&ps, &qs)?;
        let rhs = tv_discrete(&ps[0], &qs[0]) + tv_discrete(&ps[1], &qs[1]);
        worst = worst.max(lhs - rhs);
    }
    Ok(Check::at_most("product-tv", worst, 0.0, format!("{count} pairs, up to {max_atoms} atoms; observed is max(lhs - rhs)")))
}

/// Monte Carlo `P(E^c)` for a `20k`-clique in `N = 2 p l` vertices.
pub fn check_event_e(k: usize, p: usize, ell: usize, trials: u64, seed: u64) -> Result<Check> {
    let n = 2 * p * ell;
    let key = StreamKey::new(seed);
    let misses = (0..trials)
        .into_par_iter()
        .map(|i| {
            let v = sample_clique_vertices(n, 20 * k, key.child(i))?;
            Ok(u64::from(!fold_report(&v, n, p, k)?.event_e))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let est = MCEstimate::new(misses, trials);
    let bound = event_e_failure_bound(k, p);
    Ok(Check::at_most(
        format!("event-e k={k} p={p} l={ell}"),
        est.point,
        bound + 3.0 * est.se(),
        format!("{trials} placements; analytic bound {bound:.6}, se {:.2e}", est.se()),
    ))
}

/// Exact law of one null output entry against N(0,1), and a two-sample KS
/// test of reduced-entry samples against direct normal samples.
pub fn check_null_fidelity(p: usize, ell: usize, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let params = ReductionParams::desk(p, 1, ell, 16, 16)?;
    let pair = TruncatedPair::new(params.m, params.mu)?;
    let law = null_entry_law(&pair, ell, DEFAULT_GRID)?;
    let tv = law.tv_to_standard_normal();
    let bound = (-params.m * params.m / 2.0).exp();
    let key = StreamKey::new(seed);
    let per = p * p;
    let reps = samples.div_ceil(per) as u64;
    let mut reduced: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let g = sample_er(params.n, key.child(0).child(i));
            Ok(reduce_continuous(&g, &params, key.child(1).child(i))?.into_vec())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?
        .concat();
    reduced.truncate(samples);
    let mut direct: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| sample_gaussian(&MeanMatrixSpec::zero(p), key.child(2).child(i)).into_vec())
        .collect::<Vec<_>>()
        .concat();
    direct.truncate(samples);
    let pv = ks_two_sample(&reduced, &direct);
    Ok(vec![
        Check::at_most(format!("null-law-tv p={p} l={ell}"), tv, bound, format!("FFT grid {DEFAULT_GRID}, M = {:.4}", params.m)),
        Check::new(format!("null-ks p={p} l={ell}"), pv >= 1e-3, pv, 1e-3, format!("{samples} samples each; observed is the p-value")),
    ])
}

/// Bit-identical outputs across reruns and thread counts, and exactly
/// `2 N2^2 T` coins.
pub fn check_reduction_determinism(params: &ReductionParams, seed: u64) -> Result<Vec<Check>> {
    let g = sample_er(params.n, StreamKey::new(seed).child(0));
    let coins = SeededCoins::new(seed);
    let reducer = DiscreteReducer::auto(params)?;
    let run = |threads: usize| -> Result<_> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| crate::Error::Numerical(e.to_string()))?;
        pool.install(|| reducer.reduce(&g, &coins, 0))
    };
    let (a, la) = run(1)?;
    let (b, lb) = run(4)?;
    let (c, lc) = run(1)?;
    let same = a == b && b == c && la == lb && lb == lc;
    let forecast = bit_budget(params).ledger;
    let expected = 2 * (params.n2 * params.n2) as u64 * u64::from(params.big_t);
    Ok(vec![
        Check::new("reduction-determinism", same, f64::from(u8::from(!same)), 0.0, "three runs on 1, 4 and 1 threads"),
        Check::new(
            "reduction-coin-budget",
            la.total() == expected && la == forecast,
            la.total() as f64,
            expected as f64,
            format!("N2 = {}, T = {}", params.n2, params.big_t),
        ),
    ])
}

/// Table and lazy samplers pick the same atom for the same coins, and the
/// table law is within `#atoms 2^-T` of `[F1]_w`.
pub fn check_dyadic_tables(params: &ReductionParams, draws: u64, seed: u64) -> Result<Vec<Check>> {
    let pair = TruncatedPair::new(params.m, params.mu)?;
    let mut out = Vec::new();
    for branch in [Branch::F0, Branch::F1] {
        let table = DyadicQ::new(pair, branch, params.w, params.big_t, QMode::Table(Rounding::Cumulative))?;
        let lazy = DyadicQ::new(pair, branch, params.w, params.big_t, QMode::Lazy)?;
        let coins = SeededCoins::new(seed);
        let tw = u64::from(params.big_t);
        let disagreements = (0..draws)
            .into_par_iter()
            .map(|i| Ok(u64::from(table.sample(&coins, i * tw)? != lazy.sample(&coins, i * tw)?)))
            .collect::<Result<Vec<u64>>>()?
            .into_iter()
            .sum::<u64>();
        out.push(Check::new(
            format!("table-lazy-agreement {branch:?}"),
            disagreements == 0,
            disagreements as f64,
            0.0,
            format!("{draws} draws, w = {}, T = {}", params.w, params.big_t),
        ));
    }
    let exact = quantized_law(&pair, Branch::F1, params.w)?;
    for rounding in [Rounding::PerAtom, Rounding::Cumulative] {
        let q1 = DyadicQ::new(pair, Branch::F1, params.w, params.big_t, QMode::Table(rounding))?;
        let atoms = q1.grid().count as f64;
        let bound = atoms * 2f64.powi(-(params.big_t as i32));
        out.push(Check::at_most(format!("q1-tv {rounding:?}"), tv_discrete(&q1.to_dist()?, &exact), bound, format!("{atoms} atoms")));
    }
    Ok(out)
}

/// Monte Carlo Type-I+II against the analytic bound plus three standard errors.
pub fn check_detection_bound(p: usize, k: usize, lambda: f64, c: f64, test: TestKind, trials: u64, seed: u64) -> Result<Check> {
    let th = thresholds(p, k, lambda, c);
    let eb = error_bounds(p, k, lambda, c);
    let budget = ScanBudget::default();
    if test == TestKind::Scan {
        budget.check(p, k)?;
    }
    let alt = MeanMatrixSpec::leading_block(p, k, lambda)?;
    let null = MeanMatrixSpec::zero(p);
    let (tau, bound) = match test {
        TestKind::Lin => (th.lin, eb.bound_lin),
        TestKind::Scan => (th.scan, eb.bound_scan),
        TestKind::Max => (th.max, eb.bound_max),
    };
    let rates = mc_error(
        |x: &DataMatrix| match test {
            TestKind::Lin => t_lin(x) > tau,
            TestKind::Max => t_max(x) > tau,
            TestKind::Scan => t_scan(x, k, budget).expect("budget checked").statistic > tau,
        },
        |key| sample_gaussian(&null, key),
        |key| sample_gaussian(&alt, key),
        trials,
        seed,
    );
    Ok(Check::at_most(
        format!("detection-bound {test} p={p} k={k} lambda={lambda}"),
        rates.total(),
        bound + 3.0 * rates.se(),
        format!("{trials} trials; bound {bound:.6}, se {:.2e}", rates.se()),
    ))
}

/// `||A||_q <= (1 v k^(1/q - 1/2)) ||A||_2` for random rank-`k` matrices.
pub fn check_schatten(count: u64, seed: u64) -> Result<Check> {
    let key = StreamKey::new(seed);
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let mut rng = key.child(i).rng();
        let p = rng.gen_range(2..=12usize);
        let k = rng.gen_range(1..=p);
        let u: Vec<f64> = (0..p * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..p * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DataMatrix::from_fn(p, |r, c| (0..k).map(|s| u[r * k + s] * v[c * k + s]).sum());
        let two = schatten(&a, 2.0)?;
        for q in [1.0, 2.0, 4.0, f64::INFINITY] {
            let lhs = schatten(&a, q)?;
            let rhs = schatten_rank_factor(k, q) * two;
            if rhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
        }
    }
    Ok(Check::at_most("schatten-comparison", worst, 1.0 + 1e-12, format!("{count} matrices, q in {{1, 2, 4, inf}}; observed is max lhs/rhs")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub p: usize,
    pub k: usize,
    pub risk: f64,
    pub se: f64,
    pub rate: f64,
    pub ratio: f64,
}

/// Squared Frobenius risk of threshold-and-project at `k = ceil(p^0.3)`,
/// with entries `sqrt(4 log p)` on a leading `k x k` block.
pub fn estimation_rates(ps: &[usize], trials: u64, seed: u64) -> Result<Vec<RatePoint>> {
    ps.iter()
        .map(|&p| {
            let k = ((p as f64).powf(0.3).ceil() as usize).min(p);
            let theta = MeanMatrixSpec::leading_block(p, k, default_threshold(p))?;
            let level = default_threshold(p);
            let r = risk_estimate(|x| threshold_project(x, k, level), &theta, 2.0, trials, StreamKey::new(seed).child(p as u64).raw())?;
            let rate = frobenius_rate(p, k);
            Ok(RatePoint { p, k, risk: r.mean, se: r.se, rate, ratio: r.mean / rate })
        })
        .collect()
}

pub fn check_estimation_rates(ps: &[usize], trials: u64, seed: u64) -> Result<Check> {
    let pts = estimation_rates(ps, trials, seed)?;
    let hi = pts.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = pts.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let detail = pts.iter().map(|r| format!("p={} k={} risk/rate={:.3}", r.p, r.k, r.ratio)).collect::<Vec<_>>().join("; ");
    Ok(Check::at_most("estimation-rate-band", hi / lo, 3.0, detail))
}

/// How much Monte Carlo the suite spends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyScale {
    Quick,
    Full,
}

/// The full self-check suite.
pub fn run_verify(scale: VerifyScale, seed: u64) -> Result<VerifyReport> {
    let full = scale == VerifyScale::Full;
    let n = |quick: u64, big: u64| if full { big } else { quick };
    let desk = ReductionParams::desk(8, 1, 2, 8, 10)?;
    let mut checks = vec![
        check_truncation_bounds(&[8, 16, 32, 64])?,
        check_mixture_identity(&[3.0, 4.0, 5.0], n(10_000, 100_000) as usize)?,
        check_scan_oracle(n(100, 1000), 6, 2, seed)?,
        check_product_tv(n(100, 1000), 8, seed)?,
    ];
    for (k, p) in [(1, 40), (2, 80)] {
        for ell in [1, 8] {
            checks.push(check_event_e(k, p, ell, n(10_000, 100_000), seed)?);
        }
    }
    checks.extend(check_null_fidelity(8, 2, n(20_000, 100_000) as usize, seed)?);
    checks.extend(check_reduction_determinism(&desk, seed)?);
    checks.extend(check_dyadic_tables(&desk, n(10_000, 100_000), seed)?);
    for lambda in [1.0, 2.0] {
        for test in [TestKind::Lin, TestKind::Max] {
            checks.push(check_detection_bound(50, 10, lambda, 1.0, test, n(500, 10_000), seed)?);
        }
        checks.push(check_detection_bound(24, 3, lambda, 1.0, TestKind::Scan, n(200, 10_000), seed)?);
    }
    checks.push(check_schatten(n(200, 1000), seed)?);
    if full {
        checks.push(check_estimation_rates(&[32, 64, 128], 200, seed)?);
    }
    Ok(VerifyReport { checks })
}
