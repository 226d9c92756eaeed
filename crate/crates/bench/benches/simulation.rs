use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use peacock_bench::workload;
use peacock_core::{run, Algorithm, SimConfig};

fn whole_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    let workers = 100;
    for load in [0.5, 2.0] {
        let jobs = workload(load, 1000, workers, 1);
        for algo in [Algorithm::Peacock, Algorithm::Sparrow, Algorithm::Eagle] {
            let cfg = SimConfig::new(algo, workers, 10, 1);
            group.bench_with_input(BenchmarkId::new(algo.name(), load), &load, |b, _| {
                b.iter_batched(|| jobs.clone(), |jobs| run(&cfg, jobs).unwrap(), BatchSize::LargeInput)
            });
        }
    }
    group.finish();
}

criterion_group!(benches, whole_runs);
criterion_main!(benches);
