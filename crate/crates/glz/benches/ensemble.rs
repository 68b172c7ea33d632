//! Parallel vs serial ensemble averaging.
//!
//! Run with `cargo bench -p glz`. When the crate is built without the
//! `parallel` feature both benches exercise the same sequential path, which
//! gives the baseline for the speedup comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use glz::ensemble::{average_probability, GapDistribution, ModelTemplate};

fn bench_average(c: &mut Criterion) {
    let dist = GapDistribution::new(0.5, 0.1, 42).unwrap();
    let mut group = c.benchmark_group("average_probability");
    group.sample_size(10);
    for &n in &[64usize, 256] {
        let serial = ModelTemplate {
            serial: true,
            ..ModelTemplate::default()
        };
        group.bench_with_input(BenchmarkId::new("serial", n), &n, |b, &n| {
            b.iter(|| average_probability(&dist, 2.0, 0.0, &serial, n).unwrap())
        });
        let parallel = ModelTemplate::default();
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| average_probability(&dist, 2.0, 0.0, &parallel, n).unwrap())
        });
    }
    group.finish();
}

fn bench_single_propagation(c: &mut Criterion) {
    use glz::models::GlzParams;
    use glz::propagate::{transition_probability, IntegratorConfig};
    let params = GlzParams::new(0.5, 2.0, std::f64::consts::FRAC_PI_2).unwrap();
    let cfg = IntegratorConfig::default();
    c.bench_function("transition_probability", |b| {
        b.iter(|| transition_probability(&params, &cfg).unwrap())
    });
}

criterion_group!(benches, bench_average, bench_single_propagation);
criterion_main!(benches);
