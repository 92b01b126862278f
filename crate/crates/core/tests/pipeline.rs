use subdetect::detectors::regime;
use subdetect::experiment::{run_reduction_demo, run_sweep, DemoConfig, SweepConfig, TestKind};
use subdetect::model::DataMatrix;
use subdetect::plantedclique::{fold_report, sample_er, sample_planted};
use subdetect::reduction::{reduce_continuous, reduce_discrete, DiscreteReducer, QMode};
use subdetect::{ReductionParams, SeededCoins, StreamKey};

fn desk() -> ReductionParams {
    ReductionParams::desk(8, 1, 2, 8, 10).unwrap()
}

#[test]
fn reduced_entries_stay_in_range() {
    let params = desk();
    let bound = params.ell as f64 * params.m + 1.0;
    let step = 2f64.powi(-(params.t as i32));
    for seed in 0..5 {
        let g = sample_planted(params.n, params.kappa, StreamKey::new(seed)).unwrap();
        let (x, _) = reduce_discrete(&g, &params, &SeededCoins::new(seed)).unwrap();
        for &v in x.to_real().as_slice() {
            assert!(v.abs() <= bound);
            assert_eq!((v / step).fract(), 0.0);
        }
    }
}

#[test]
fn planted_block_is_elevated_after_the_continuous_reduction() {
    let params = desk();
    let reps = 400;
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..reps {
        let key = StreamKey::new(77).child(r);
        let g = sample_planted(params.n, params.kappa, key).unwrap();
        let rep = fold_report(g.planted().unwrap(), params.n, params.p, params.k).unwrap();
        if !rep.event_e {
            continue;
        }
        let x: DataMatrix = reduce_continuous(&g, &params, key.child(1)).unwrap();
        for &a in &rep.u1 {
            for &b in &rep.u2 {
                sum += x.get(a, b);
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    assert!(mean >= params.mu / params.ell as f64, "mean {mean} below mu/l = {}", params.mu / params.ell as f64);
}

#[test]
fn lazy_and_table_reducers_share_the_coin_layout() {
    let params = desk();
    let g = sample_er(params.n, StreamKey::new(3));
    let coins = SeededCoins::new(11);
    let (a, la) = DiscreteReducer::new(&params, QMode::Lazy).unwrap().reduce(&g, &coins, 0).unwrap();
    let (b, lb) = DiscreteReducer::new(&params, QMode::Table(subdetect::reduction::Rounding::Cumulative)).unwrap().reduce(&g, &coins, 0).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
}

#[test]
fn demo_null_rate_is_within_slack_of_direct_noise() {
    let r = run_reduction_demo(&DemoConfig::new(80, 2, 0.08, 40, 5)).unwrap();
    assert!(r.null_within_slack(), "composed {:?} direct {:?}", r.composed_type1, r.direct_type1);
    assert!(r.ledger_matches_forecast());
    assert_eq!(r.ledger.total(), 2 * (r.params.n2 * r.params.n2) as u64 * u64::from(r.params.big_t));
    let s = r.slack;
    assert!((s.total - (s.ten_over_p + s.split_term + s.collision_term)).abs() < 1e-15);
    assert_eq!(s.ten_over_p, 10.0 / 80.0);
}

#[test]
fn every_sweep_label_matches_the_classifier() {
    let cfg = SweepConfig {
        p: vec![10],
        alpha: vec![0.2, 0.5, 2.0 / 3.0, 0.9],
        beta: vec![0.0, 0.1, 1.0 / 3.0, 0.5, 0.8, 1.0],
        trials: 100,
        tests: vec![TestKind::Max],
        seed: 2,
        budget: 1000,
        c: 1.0,
        delta: Some(0.1),
    };
    let (r, _) = run_sweep(&cfg).unwrap();
    assert_eq!(r.cells.len(), 24);
    for c in &r.cells {
        assert_eq!(c.regime, regime(c.alpha, c.beta).unwrap());
    }
}
