use std::hint::black_box;

use abrf::solver::grid::{default_eps_grid_regression, default_tau_grid, grid_search};
use abrf::solver::{solve_lp, solve_qp_gram, train_gradient, GradConfig, GradModel, LpOptions, QpOptions};
use abrf::{AttentionParams, GrowthCondition, ModelKind, SoftmaxSign, TrainOptions};
use abrf_bench::{fitted, friedman2};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn qp(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_qp");
    for n in [80, 400] {
        let (_, set) = fitted(&friedman2(n), 100, GrowthCondition::CONDITION_1);
        let gram = set.qp_gram(0.5, 1.0, SoftmaxSign::Negative);
        for (label, accelerate) in [("accelerated", true), ("plain", false)] {
            let opts = QpOptions { accelerate, ..QpOptions::default() };
            group.bench_with_input(BenchmarkId::new(label, n), &gram, |b, g| b.iter(|| solve_qp_gram(black_box(g), &opts).unwrap()));
        }
    }
    group.finish();
}

fn lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_lp");
    group.sample_size(10);
    for (n, trees) in [(40, 20), (80, 100)] {
        let (_, set) = fitted(&friedman2(n), trees, GrowthCondition::CONDITION_1);
        let inst = set.lp_instance(0.5, 1.0, SoftmaxSign::Negative).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("n{n}-t{trees}")), &inst, |b, i| {
            b.iter(|| solve_lp(black_box(i), &LpOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let (_, set) = fitted(&friedman2(80), 100, GrowthCondition::CONDITION_2);
    let mut init = AttentionParams::uniform(set.n_trees(), set.n_features());
    init.epsilon = 0.5;
    let cfg = GradConfig { max_iters: 200, tolerance: 1e-300, ..GradConfig::default() };
    c.bench_function("train_gradient/abrf3-200-steps", |b| {
        b.iter(|| train_gradient(set.panels(), set.target_ref(), black_box(&init), &cfg, GradModel::Abrf3).unwrap())
    });
}

fn grid(c: &mut Criterion) {
    let ds = friedman2(100);
    let train = ds.subset(&(0..64).collect::<Vec<_>>());
    let val = ds.subset(&(64..80).collect::<Vec<_>>());
    let (forest, train_set) = fitted(&train, 100, GrowthCondition::CONDITION_1);
    let val_set = abrf::PanelSet::new(&forest, &val).unwrap();
    let (eps, tau) = (default_eps_grid_regression(), default_tau_grid());
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    for kind in [ModelKind::Softmax, ModelKind::Abrf1Qp] {
        group.bench_function(kind.name(), |b| {
            b.iter(|| grid_search(kind, &train_set, &val_set, &eps, &tau, &TrainOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, qp, lp, gradient, grid);
criterion_main!(benches);
