use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TestKind;
use crate::detectors::{error_bounds, regime, t_lin, t_max, t_scan, thresholds, Regime, ScanBudget, DEFAULT_C};
use crate::error::{Error, Result};
use crate::model::{sample_gaussian, MeanMatrixSpec};
use crate::oracles::{mc_error, MCEstimate};
use crate::rng::StreamKey;

fn default_tests() -> Vec<TestKind> {
    vec![TestKind::Lin, TestKind::Scan, TestKind::Max]
}

fn default_budget() -> u64 {
    ScanBudget::default().max_subsets
}

fn default_c() -> f64 {
    DEFAULT_C
}

/// Phase-diagram sweep over `k = round(p^alpha)`, `lambda = p^-beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub p: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub trials: u64,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestKind>,
    #[serde(default)]
    pub seed: u64,
    /// Maximum column subsets per exact scan.
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Hardness-regime exponent; carried into the report, never used.
    #[serde(default)]
    pub delta: Option<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.p.is_empty() || self.alpha.is_empty() || self.beta.is_empty() || self.tests.is_empty() {
            return bad("p, alpha, beta and tests must all be nonempty".into());
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha = {a} must lie in (0, 1)"));
        }
        if let Some(b) = self.beta.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return bad(format!("beta = {b} must lie in [0, 1]"));
        }
        if self.trials < 100 {
            return bad(format!("trials = {} must be at least 100", self.trials));
        }
        if let Some(p) = self.p.iter().find(|p| **p < 2) {
            return bad(format!("p = {p} must be at least 2"));
        }
        if !(self.c > 0.0) {
            return bad(format!("c = {} must be positive", self.c));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    BudgetSkipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
    pub test: TestKind,
    pub regime: Regime,
    pub status: CellStatus,
    pub threshold: f64,
    /// Analytic Type-I+II bound, clipped at 1.
    pub bound: f64,
    pub type1: Option<MCEstimate>,
    pub type2: Option<MCEstimate>,
    pub error: Option<f64>,
    pub se: Option<f64>,
    /// Column subsets an exact scan would need, for skipped cells.
    pub needed_subsets: Option<u128>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub alpha: f64,
    pub beta: f64,
    pub p: usize,
    pub test: TestKind,
    pub seconds: f64,
}

/// `round(p^alpha)` clamped to `1..=p`.
pub fn sweep_k(p: usize, alpha: f64) -> usize {
    ((p as f64).powf(alpha).round() as usize).clamp(1, p)
}

pub fn sweep_lambda(p: usize, beta: f64) -> f64 {
    (p as f64).powf(-beta)
}

fn cell_seed(seed: u64, alpha: f64, beta: f64, p: usize, test: TestKind) -> u64 {
    StreamKey::new(seed).child(alpha.to_bits()).child(beta.to_bits()).child(p as u64).child(test as u64).raw()
}

fn run_cell(cfg: &SweepConfig, alpha: f64, beta: f64, p: usize, test: TestKind) -> Result<SweepCell> {
    let k = sweep_k(p, alpha);
    let lambda = sweep_lambda(p, beta);
    let th = thresholds(p, k, lambda, cfg.c);
    let eb = error_bounds(p, k, lambda, cfg.c);
    let (threshold, bound) = match test {
        TestKind::Lin => (th.lin, eb.bound_lin),
        TestKind::Scan => (th.scan, eb.bound_scan),
        TestKind::Max => (th.max, eb.bound_max),
    };
    let mut cell = SweepCell {
        alpha,
        beta,
        p,
        k,
        lambda,
        test,
        regime: regime(alpha, beta)?,
        status: CellStatus::Ok,
        threshold,
        bound,
        type1: None,
        type2: None,
        error: None,
        se: None,
        needed_subsets: None,
    };
    let budget = ScanBudget { max_subsets: cfg.budget };
    if test == TestKind::Scan {
        if let Err(Error::BudgetExceeded { needed, .. }) = budget.check(p, k) {
            cell.status = CellStatus::BudgetSkipped;
            cell.needed_subsets = Some(needed);
            return Ok(cell);
        }
    }
    let null = MeanMatrixSpec::zero(p);
    let alt = MeanMatrixSpec::leading_block(p, k, lambda)?;
    let rates = mc_error(
        |x| match test {
            TestKind::Lin => t_lin(x) > threshold,
            TestKind::Max => t_max(x) > threshold,
            TestKind::Scan => t_scan(x, k, budget).expect("budget checked").statistic > threshold,
        },
        |key| sample_gaussian(&null, key),
        |key| sample_gaussian(&alt, key),
        cfg.trials,
        cell_seed(cfg.seed, alpha, beta, p, test),
    );
    cell.type1 = Some(rates.type1);
    cell.type2 = Some(rates.type2);
    cell.error = Some(rates.total());
    cell.se = Some(rates.se());
    Ok(cell)
}

/// Runs every `(alpha, beta, p, test)` cell. Cells come back in config
/// order; wall-clock times are returned separately so the report itself is
/// reproducible byte for byte.
pub fn run_sweep(cfg: &SweepConfig) -> Result<(SweepReport, Vec<CellTiming>)> {
    cfg.validate()?;
    let mut keys = Vec::new();
    for &a in &cfg.alpha {
        for &b in &cfg.beta {
            for &p in &cfg.p {
                for &t in &cfg.tests {
                    keys.push((a, b, p, t));
                }
            }
        }
    }
    let results: Vec<(SweepCell, CellTiming)> = keys
        .par_iter()
        .map(|&(a, b, p, t)| {
            let start = Instant::now();
            let cell = run_cell(cfg, a, b, p, t)?;
            Ok((cell, CellTiming { alpha: a, beta: b, p, test: t, seconds: start.elapsed().as_secs_f64() }))
        })
        .collect::<Result<_>>()?;
    let (cells, timings) = results.into_iter().unzip();
    Ok((SweepReport { config: cfg.clone(), cells }, timings))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,beta,p,k,lambda,test,regime,status,threshold,bound,type1,type2,error,se\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{:.6},{},{},{},{:.6},{:.6},{},{},{},{}\n",
                c.alpha,
                c.beta,
                c.p,
                c.k,
                c.lambda,
                c.test,
                c.regime,
                match c.status {
                    CellStatus::Ok => "ok",
                    CellStatus::BudgetSkipped => "budget-skipped",
                },
                c.threshold,
                c.bound,
                opt(c.type1.map(|e| e.point)),
                opt(c.type2.map(|e| e.point)),
                opt(c.error),
                opt(c.se),
            ));
        }
        s
    }

    pub fn cell(&self, alpha: f64, beta: f64, p: usize, test: TestKind) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.beta == beta && c.p == p && c.test == test)
    }
}
