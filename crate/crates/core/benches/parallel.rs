use std::hint::black_box;

use aimer::estimators::{fit_aimer, fit_spc};
use aimer::evaluation::{run_simulation_suite, SuiteOptions};
use aimer::exec::{parallel_enabled, with_jobs};
use aimer::simulation::{simulate, simulation_config};
use aimer::Selection;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn suite_options() -> SuiteOptions {
    let mut opts = SuiteOptions::new(2, 4, 1);
    opts.p = Some(300);
    opts.cv_folds = 5;
    opts
}

/// One simulation study on a single worker and on the full pool. Without the
/// `parallel` feature both arms run the sequential fallback.
fn suite(c: &mut Criterion) {
    let opts = suite_options();
    let mut group = c.benchmark_group("simulation_suite");
    group.sample_size(10);
    group.bench_function("jobs_1", |b| b.iter(|| with_jobs(1, || run_simulation_suite(black_box(&opts)).unwrap())));
    let label = if parallel_enabled() { "jobs_all" } else { "jobs_all_sequential_build" };
    group.bench_function(label, |b| b.iter(|| with_jobs(0, || run_simulation_suite(black_box(&opts)).unwrap())));
    group.finish();
}

/// AIMER against SPC as p grows with n and the screened-set size fixed.
fn fit_scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_scaling");
    group.sample_size(20);
    for p in [500, 1000, 2000, 4000] {
        let mut cfg = simulation_config(1, 10.0, 3).unwrap();
        cfg.n = 100;
        cfg.p = p;
        let data = simulate(&cfg).unwrap().raw().center().unwrap();
        let sel = Selection::Count(50);
        group.bench_with_input(BenchmarkId::new("aimer", p), &data, |b, data| {
            b.iter(|| fit_aimer(black_box(data), &sel, 3, 0.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("spc", p), &data, |b, data| {
            b.iter(|| fit_spc(black_box(data), &sel, 3).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, suite, fit_scaling);
criterion_main!(benches);
