use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use tabp_bench::{pareto_model, realization};
use tabp_core::geometry::{self, decompose_stream};
use tabp_core::mc::{self, McConfig};
use tabp_core::process::{self, GermSampler};
use tabp_core::{classify, ClosedForms, Domain, GrainDistribution, ModelParams};

fn sampling(c: &mut Criterion) {
    let params = pareto_model(1.0);
    let mut group = c.benchmark_group("sample_germs");
    for window in [1e3, 1e5] {
        group.throughput(Throughput::Elements(window as u64));
        group.bench_with_input(BenchmarkId::from_parameter(window), &window, |b, &w| {
            b.iter(|| GermSampler::new(&params, 0.0, w, process::replicate_rng(1, 0)).count())
        });
    }
    group.finish();
}

fn decomposition(c: &mut Criterion) {
    let params = pareto_model(1.0);
    let real = realization(&params, 1e5, 3);
    let mut group = c.benchmark_group("decompose");
    group.throughput(Throughput::Elements(real.germs.len() as u64));
    group.bench_function("batch_1e5", |b| {
        b.iter(|| geometry::decompose(black_box(&real)).unwrap())
    });
    // the streaming sweep stops once the remaining window is covered
    group.bench_function("stream_1e5", |b| {
        b.iter(|| {
            let germs = GermSampler::new(&params, 0.0, 1e5, process::replicate_rng(3, 0));
            decompose_stream(germs, 1e5, Domain::HalfLine).unwrap()
        })
    });
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("analytics");
    let flagship = ClosedForms::new(pareto_model(1.0));
    group.bench_function("vacant_length_1e6", |b| {
        b.iter(|| flagship.vacant_length_to(black_box(1e6)).unwrap())
    });
    let regime_two = pareto_model(0.5);
    group.bench_function("classify_pareto_0.5", |b| b.iter(|| classify(black_box(&regime_two))));
    let ys: Vec<f64> = (0..=60).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    let tab = GrainDistribution::pareto(0.5).unwrap().tabulate(&ys).unwrap();
    let tabulated = ModelParams::half_line(1.0, tab).unwrap();
    group.bench_function("classify_tabulated", |b| b.iter(|| classify(black_box(&tabulated))));
    group.finish();
}

fn harness(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    let mut cfg = McConfig::new(pareto_model(1.0), 1e3, 1000, 42);
    cfg.workers = 1;
    group.bench_function("flagship_1000_reps", |b| b.iter(|| mc::verify(&cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, sampling, decomposition, quadrature, harness);
criterion_main!(benches);
