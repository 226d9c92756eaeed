//! Per-entity random streams split from one run seed.
//!
//! Each entity draws from its own ChaCha stream selected by a fixed stream
//! id, so the numbers an entity sees do not depend on how other entities
//! interleave their draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const WORKLOAD: u64 = 1;
const SCHEDULER_BASE: u64 = 1 << 32;
const WORKER_BASE: u64 = 2 << 32;

fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn workload_rng(seed: u64) -> SimRng {
    stream(seed, WORKLOAD)
}

pub fn scheduler_rng(seed: u64, id: u32) -> SimRng {
    stream(seed, SCHEDULER_BASE + id as u64)
}

pub fn worker_rng(seed: u64, id: u32) -> SimRng {
    stream(seed, WORKER_BASE + id as u64)
}
