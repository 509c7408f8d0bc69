use std::hint::black_box;

use alertroute_bench::paperlike;
use alertroute_core::{calibrate_hybrid, union_rate, RoutingBudget, Score, ScoreSample, SolverSettings};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const SIZES: [usize; 3] = [10_000, 100_000, 1_000_000];

fn bench_interpolated_cutoff(c: &mut Criterion) {
    let mut group = c.benchmark_group("interpolated_cutoff");
    for n in SIZES {
        let rows = paperlike(n);
        let sample = ScoreSample::new(rows.iter().map(|r| r.content_score())).unwrap();
        let budget = RoutingBudget::new(1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| s.interpolated_cutoff(black_box(budget)))
        });
    }
    group.finish();
}

fn bench_union_rate(c: &mut Criterion) {
    let mut group = c.benchmark_group("union_rate");
    for n in SIZES {
        let rows = paperlike(n);
        let (cc, pc) = (Score::new(0.47).unwrap(), Score::new(0.47).unwrap());
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &rows, |b, rows| {
            b.iter(|| union_rate(black_box(rows), cc, pc).unwrap())
        });
    }
    group.finish();
}

fn bench_calibrate_hybrid(c: &mut Criterion) {
    let mut group = c.benchmark_group("calibrate_hybrid");
    group.sample_size(10);
    let settings = SolverSettings::default();
    for n in SIZES {
        let rows = paperlike(n);
        for p in [0.3, 1.0, 4.0] {
            let budget = RoutingBudget::new(p).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("p={p}"), n), &rows, |b, rows| {
                b.iter(|| calibrate_hybrid(black_box(rows), budget, &settings).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_interpolated_cutoff, bench_union_rate, bench_calibrate_hybrid);
criterion_main!(benches);
