use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use peacock_bench::random_probes;
use peacock_core::{BypassRule, Micros, SharedState, WaitingQueue};

fn enqueue(c: &mut Criterion) {
    let mut group = c.benchmark_group("enqueue_probe");
    let roomy = SharedState { probe_quota: u64::MAX, load_quota: Micros::MAX, ..Default::default() };
    let now = Micros::from_secs(600);
    for len in [4usize, 32, 256] {
        let existing = random_probes(len, 1);
        let arriving = random_probes(64, 2);
        for rule in [BypassRule::Guarded, BypassRule::Literal] {
            group.bench_with_input(BenchmarkId::new(format!("{rule:?}"), len), &len, |b, _| {
                b.iter_batched(
                    || WaitingQueue::from_probes(rule, existing.iter().cloned()),
                    |mut q| {
                        for p in &arriving {
                            q.enqueue_probe(p.clone(), now, Micros::from_secs(5), &roomy).unwrap();
                        }
                        q
                    },
                    BatchSize::SmallInput,
                )
            });
        }
    }
    group.finish();
}

fn trim(c: &mut Criterion) {
    let probes = random_probes(256, 3);
    let tight = SharedState { probe_quota: 8, load_quota: Micros::from_secs(60), ..Default::default() };
    c.bench_function("trim_to_quota/256", |b| {
        b.iter_batched(
            || WaitingQueue::from_probes(BypassRule::Guarded, probes.iter().cloned()),
            |mut q| q.trim_to_quota(&tight),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, enqueue, trim);
criterion_main!(benches);
