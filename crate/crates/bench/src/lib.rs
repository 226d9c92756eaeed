//! Inputs shared by the benchmarks.

use peacock_core::workload::{generate, SyntheticSpec};
use peacock_core::{Job, Micros, Probe, ProbeKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` probes with random arrival, estimate and allowance, ids `0..n`.
pub fn random_probes(n: usize, seed: u64) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u32)
        .map(|i| {
            let key = ProbeKey { job: i as u64, stage: 0, index: 0 };
            let lambda = Micros::from_secs(rng.random_range(0..600));
            let theta = Micros::from_secs_f64(rng.random_range(0.5..120.0));
            let mu = Micros::from_secs(rng.random_range(0..300));
            Probe::new(key, 0, lambda, theta, mu).expect("positive estimate")
        })
        .collect()
}

/// Heterogeneous synthetic workload sized for `workers`.
pub fn workload(load: f64, jobs: usize, workers: u32, seed: u64) -> Vec<Job> {
    generate(&SyntheticSpec::heterogeneous(load, jobs, seed), workers).jobs
}
