use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use subdetect::detectors::{t_scan, ScanBudget};
use subdetect::reduction::{reduce_discrete, Branch, DyadicQ, QMode, Rounding, TruncatedPair};
use subdetect::{MeanMatrixSpec, SeededCoins, StreamKey};
use subdetect_bench::{desk_instance, planted_matrix};

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    for &(p, k) in &[(12usize, 3usize), (24, 3), (40, 2)] {
        let x = planted_matrix(p, k, 2.0, 1);
        group.bench_with_input(BenchmarkId::from_parameter(format!("p{p}_k{k}")), &x, |b, x| {
            b.iter(|| t_scan(black_box(x), k, ScanBudget::default()).unwrap())
        });
    }
    group.finish();
}

fn sample_gaussian(c: &mut Criterion) {
    let theta = MeanMatrixSpec::leading_block(200, 20, 0.5).unwrap();
    let mut i = 0u64;
    c.bench_function("sample_gaussian_p200", |b| {
        b.iter(|| {
            i += 1;
            subdetect::model::sample_gaussian(&theta, StreamKey::new(i))
        })
    });
}

fn sample_q(c: &mut Criterion) {
    let (params, _) = desk_instance(0);
    let pair = TruncatedPair::new(params.m, params.mu).unwrap();
    let coins = SeededCoins::new(3);
    let tw = u64::from(params.big_t);
    let mut group = c.benchmark_group("sample_q");
    for (label, mode) in [("per_atom", QMode::Table(Rounding::PerAtom)), ("cumulative", QMode::Table(Rounding::Cumulative)), ("lazy", QMode::Lazy)] {
        let q = DyadicQ::new(pair, Branch::F1, params.w, params.big_t, mode).unwrap();
        let mut i = 0u64;
        group.bench_function(label, |b| {
            b.iter(|| {
                i += 1;
                q.sample(&coins, i * tw).unwrap()
            })
        });
    }
    group.finish();
}

fn reduce(c: &mut Criterion) {
    let (params, g) = desk_instance(5);
    let coins = SeededCoins::new(7);
    c.bench_function("reduce_discrete_p8_l2", |b| b.iter(|| reduce_discrete(black_box(&g), &params, &coins).unwrap()));
}

criterion_group!(benches, scan, sample_gaussian, sample_q, reduce);
criterion_main!(benches);
