use serde::{Deserialize, Serialize};

use crate::detectors::{error_bounds, t_scan, thresholds, ScanBudget, DEFAULT_C};
use crate::error::Result;
use crate::model::{sample_discretized, MeanMatrixSpec};
use crate::oracles::{mc_error, MCEstimate};
use crate::plantedclique::{fold_report, sample_clique_vertices, sample_er, sample_planted};
use crate::reduction::{bit_budget, composition_slack, BudgetForecast, CoinLedger, CompositionSlack, DiscreteReducer, ReductionParams, WChoice};
use crate::rng::{SeededCoins, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub p: usize,
    pub k: usize,
    pub lambda: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub t: Option<u32>,
    #[serde(default = "minimal")]
    pub w: WChoice,
}

fn minimal() -> WChoice {
    WChoice::Minimal
}

impl DemoConfig {
    pub fn new(p: usize, k: usize, lambda: f64, trials: u64, seed: u64) -> Self {
        DemoConfig { p, k, lambda, trials, seed, t: None, w: WChoice::Minimal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub config: DemoConfig,
    pub params: ReductionParams,
    pub threshold: f64,
    /// Scan test applied to reduced `G(N, 1/2)` instances.
    pub composed_type1: MCEstimate,
    /// Scan test applied to reduced planted instances.
    pub composed_type2: MCEstimate,
    /// Scan test applied directly to `[Z]_t` with `Z` pure noise.
    pub direct_type1: MCEstimate,
    /// `5/p` allowance between the reduced null law and pure noise.
    pub null_slack: f64,
    /// Fraction of planted instances where both folded images reach size k.
    pub event_e: MCEstimate,
    /// Lemma-1 bound of the scan test at `(p, k, lambda)`.
    pub scan_bound: f64,
    pub slack: CompositionSlack,
    /// `scan_bound + slack.total`, clipped at 1.
    pub composed_bound: f64,
    /// Coins consumed by one reduction.
    pub ledger: CoinLedger,
    pub forecast: BudgetForecast,
}

impl DemoReport {
    pub fn composed_error(&self) -> f64 {
        self.composed_type1.point + self.composed_type2.point
    }

    pub fn ledger_matches_forecast(&self) -> bool {
        self.ledger == self.forecast.ledger
    }

    /// Composed Type-I at most the direct upper Wilson limit plus `5/p`.
    pub fn null_within_slack(&self) -> bool {
        self.composed_type1.point <= self.direct_type1.ci_high + self.null_slack
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Planted clique to submatrix detection, end to end.
///
/// Each trial draws a fresh graph and a fresh coin stream, maps it through
/// the discretized reduction and runs the exact scan at its default
/// threshold. Graph `i` of branch `b` comes from `key.child(b).child(i)`,
/// its coins from `SeededCoins::new` of the same key's child 7.
pub fn run_reduction_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    let params = ReductionParams::choose(cfg.p, cfg.k, cfg.lambda, cfg.t, cfg.w)?;
    let reducer = DiscreteReducer::auto(&params)?;
    let budget = ScanBudget::default();
    budget.check(cfg.p, cfg.k)?;
    let tau = thresholds(cfg.p, cfg.k, cfg.lambda, DEFAULT_C).scan;
    let root = StreamKey::new(cfg.seed);

    let reduce_and_test = |g: crate::plantedclique::AdjacencyMatrix, key: StreamKey| -> Result<(bool, CoinLedger)> {
        let coins = SeededCoins::new(key.child(7).raw());
        let (x, ledger) = reducer.reduce(&g, &coins, 0)?;
        let stat = t_scan(&x.to_real(), cfg.k, budget)?.statistic;
        Ok((stat > tau, ledger))
    };

    // the closures of mc_error cannot fail, so errors are surfaced first on trial 0
    reduce_and_test(sample_er(params.n, root.child(0).child(0)), root.child(0).child(0))?;
    let (_, ledger) = reduce_and_test(sample_planted(params.n, params.kappa, root.child(1).child(0))?, root.child(1).child(0))?;

    let composed = mc_error(
        |rejected: &bool| *rejected,
        |key| reduce_and_test(sample_er(params.n, key), key).expect("checked on trial 0").0,
        |key| {
            let g = sample_planted(params.n, params.kappa, key).expect("checked on trial 0");
            reduce_and_test(g, key).expect("checked on trial 0").0
        },
        cfg.trials,
        cfg.seed,
    );

    let null = MeanMatrixSpec::zero(cfg.p);
    let direct = mc_error(
        |x: &crate::model::QuantizedMatrix| t_scan(&x.to_real(), cfg.k, budget).expect("budget checked").statistic > tau,
        |key| sample_discretized(&null, params.t, key).expect("scale checked"),
        |key| sample_discretized(&null, params.t, key).expect("scale checked"),
        cfg.trials,
        root.child(2).raw(),
    );

    let hits = (0..cfg.trials)
        .filter(|&i| {
            let v = sample_clique_vertices(params.n, params.kappa, root.child(3).child(i)).expect("kappa <= N");
            fold_report(&v, params.n, params.p, params.k).map(|r| r.event_e).unwrap_or(false)
        })
        .count() as u64;

    let scan_bound = error_bounds(cfg.p, cfg.k, cfg.lambda, DEFAULT_C).bound_scan;
    let slack = composition_slack(cfg.p, cfg.k);
    Ok(DemoReport {
        config: cfg.clone(),
        forecast: bit_budget(&params),
        params,
        threshold: tau,
        composed_type1: composed.type1,
        composed_type2: composed.type2,
        direct_type1: direct.type1,
        null_slack: 5.0 / cfg.p as f64,
        event_e: MCEstimate::new(hits, cfg.trials),
        scan_bound,
        composed_bound: (scan_bound + slack.total).min(1.0),
        slack,
        ledger,
    })
}
