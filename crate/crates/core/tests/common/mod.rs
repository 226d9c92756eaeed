//! Helpers shared by the integration test targets: a reference model of the
//! enqueue procedure and the hand-traced end-to-end fixtures.
#![allow(dead_code)]

use peacock_core::config::TargetPolicy;
use peacock_core::{Algorithm, Job, Micros, SimConfig, Stage};

/// Bypass reading used by the reference, mirroring `BypassRule`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefRule {
    Guarded,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefProbe {
    pub id: u32,
    pub lambda: u64,
    pub theta: u64,
    pub mu: u64,
}

impl RefProbe {
    pub fn deadline(&self) -> u64 {
        self.lambda + self.mu
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefOutcome {
    /// `Some(index)` when inserted, `None` when marked for rotation.
    pub placed: Option<usize>,
    /// Queue ids after trimming, head first.
    pub queue: Vec<u32>,
    /// Evicted ids in removal order.
    pub evicted: Vec<u32>,
}

/// Reference enqueue written from the decision rules alone. Instead of
/// carrying a running wait estimate it recomputes, for each scan position,
/// the start offset of every entry from prefix sums.
pub fn ref_enqueue(
    queue: &[RefProbe],
    p: RefProbe,
    tau: u64,
    delta: u64,
    phi: u64,
    omega: u64,
    rule: RefRule,
) -> RefOutcome {
    let mut start = vec![delta];
    for q in queue {
        start.push(start.last().unwrap() + q.theta);
    }
    let mut stop: Option<usize> = None;
    for i in (0..queue.len()).rev() {
        let q = queue[i];
        let gamma_here = start[i + 1];
        let passes = if p.lambda >= q.lambda {
            p.theta <= q.theta
                && match rule {
                    RefRule::Guarded => tau < q.deadline() && tau + start[i] + p.theta <= q.deadline(),
                    RefRule::Literal => q.deadline() + p.theta <= tau,
                }
        } else {
            let stays = q.theta <= p.theta && tau + gamma_here <= p.deadline();
            let guard = rule == RefRule::Guarded && tau >= q.deadline();
            !(stays || guard)
        };
        if !passes {
            stop = Some(i + 1);
            break;
        }
    }
    let mut entries: Vec<RefProbe> = queue.to_vec();
    let placed = match stop {
        None => {
            entries.insert(0, p);
            Some(0)
        }
        Some(pos) => {
            let wait = start[pos];
            if tau + wait <= p.deadline() || p.deadline() <= tau {
                entries.insert(pos, p);
                Some(pos)
            } else {
                None
            }
        }
    };
    let mut evicted = Vec::new();
    loop {
        let total: u64 = entries.iter().map(|e| e.theta).sum();
        if entries.is_empty() || ((entries.len() as u64) < phi && total < omega) {
            break;
        }
        evicted.push(entries.pop().unwrap().id);
    }
    RefOutcome { placed, queue: entries.iter().map(|e| e.id).collect(), evicted }
}

pub fn secs(s: f64) -> Micros {
    Micros::from_secs_f64(s)
}

pub fn single_stage(id: u64, arrival: Micros, durations_s: &[f64]) -> Job {
    Job { id, arrival, stages: vec![Stage::single(durations_s.iter().map(|&d| secs(d)).collect())] }
}

/// Configuration used by both hand-traced fixtures.
pub fn hand_trace_config(workers: u32) -> SimConfig {
    let mut cfg = SimConfig::new(Algorithm::Peacock, workers, 1, 0);
    cfg.targets = TargetPolicy::RoundRobin;
    cfg.network_delay = Micros::from_millis(5);
    cfg.rotation_interval = Micros::from_secs(1);
    cfg
}

/// Two workers, three single-task 10s jobs submitted together.
pub fn fixture_two_workers() -> (SimConfig, Vec<Job>) {
    let jobs = (0..3).map(|i| single_stage(i, Micros::ZERO, &[10.0])).collect();
    (hand_trace_config(2), jobs)
}

/// Hand-executed schedule for [`fixture_two_workers`]:
///
/// * 0.005 probes reach w0, w1, w0. j0 and j1 reserve idle slots; j2 queues
///   on w0 (φ=2, ω=15s admit it).
/// * 0.015 tasks of j0 and j1 start, finishing at 10.015.
/// * 10.015 w0 promotes j2, whose data arrives at 10.025; done at 20.025.
pub const FIXTURE_TWO_WORKERS_JCT: [f64; 3] = [10.015, 10.015, 20.025];

/// Three workers, five jobs exercising bypass, eviction and rotation.
pub fn fixture_three_workers() -> (SimConfig, Vec<Job>) {
    let jobs = vec![
        single_stage(0, secs(0.0), &[20.0, 20.0, 20.0]),
        single_stage(1, secs(1.0), &[30.0]),
        single_stage(2, secs(2.0), &[5.0]),
        single_stage(3, secs(4.0), &[2.0, 2.0]),
        single_stage(4, secs(30.0), &[10.0]),
    ];
    (hand_trace_config(3), jobs)
}

/// Hand-executed schedule for [`fixture_three_workers`]. Probes go to workers
/// round-robin: j0 → w0,w1,w2; j1 → w0; j2 → w1; j3 → w2,w0; j4 → w1.
///
/// * 0.015 the three j0 tasks start on all workers and end at 20.015.
/// * 1.005 j1's probe (deadline 21) lands on busy w0; φ=1 evicts it. It
///   reaches w1 at 2.005, right after j2's probe (θ=5, deadline 32). The
///   older j1 probe cannot keep its deadline behind j2, so it passes it, and
///   the trim at φ=2 evicts j2's probe.
/// * j2's probe then circles the ring: w0 and w2 each hold one j3 probe it
///   may not pass (shorter and older-deadline safe), so it is trimmed; on w1
///   it cannot pass j1 without breaking j1's deadline and it cannot wait
///   there itself, so it rotates.
/// * 20.015 all j0 tasks end. j3 runs on w0 and w2 until 22.025 and j1 on
///   w1 until 50.025. The state derived at 20.020 (φ=1) reaches w1 at
///   22.005 and evicts j2's probe, which runs on idle w2 from 23.015 to
///   28.015 after 19 hops.
/// * 30.005 j4's probe hits busy w1, is rotated at 31.0 and runs on w2 from
///   31.015 to 41.015.
pub const FIXTURE_THREE_WORKERS_JCT: [f64; 5] = [20.015, 49.025, 26.015, 18.025, 11.015];

/// Rotation hops recorded per job in the three-worker fixture.
pub const FIXTURE_THREE_WORKERS_ROTATIONS: [&[u32]; 5] = [&[0, 0, 0], &[1], &[19], &[0, 0], &[1]];
