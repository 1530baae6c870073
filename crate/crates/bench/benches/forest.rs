use std::hint::black_box;

use abrf::{fit_forest, Ensemble, ForestConfig, GrowthCondition};
use abrf_bench::{friedman2, tictactoe};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_forest");
    group.sample_size(10);
    let datasets = [("friedman2-500", friedman2(500)), ("tictactoe", tictactoe())];
    for (name, ds) in &datasets {
        for (ensemble, condition, label) in [
            (Ensemble::Rf, GrowthCondition::CONDITION_1, "rf-c1"),
            (Ensemble::Rf, GrowthCondition::CONDITION_2, "rf-c2"),
            (Ensemble::Ert, GrowthCondition::CONDITION_2, "ert-c2"),
        ] {
            let cfg = ForestConfig::new(100, ensemble, condition, 7);
            group.bench_with_input(BenchmarkId::new(label, name), ds, |b, ds| b.iter(|| fit_forest(black_box(ds), &cfg).unwrap()));
        }
    }
    group.finish();
}

fn panels(c: &mut Criterion) {
    let ds = friedman2(500);
    let forest = fit_forest(&ds, &ForestConfig::new(100, Ensemble::Rf, GrowthCondition::CONDITION_2, 7)).unwrap();
    c.bench_function("panels/friedman2-500", |b| b.iter(|| forest.panels(black_box(&ds)).unwrap()));
}

criterion_group!(benches, fit, panels);
criterion_main!(benches);
