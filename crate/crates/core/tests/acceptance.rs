//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts the same condition. The tests share one lock so that their
//! wall-clock budgets are measured without interference.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use common::{ref_enqueue, RefProbe, RefRule};
use peacock_core::elastic_queue::{BypassRule, Placement, Probe, SharedState, Version, WaitingQueue};
use peacock_core::message::{Ctx, Payload, PeerUpdate, Sign};
use peacock_core::metrics::{write_json, write_records_csv, DEFAULT_CDF_POINTS};
use peacock_core::workload::{generate, SyntheticSpec};
use peacock_core::{
    fraction_faster, report_for, run, Aggregate, Algorithm, Entity, Job, Micros, ProbeKey, RunResult, Scheduler,
    SimConfig, TaskRef,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes straight to the process's stderr so the line appears even when
/// the harness captures test output.
fn verdict(n: u32, pass: bool, detail: &str, started: Instant) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {tag} ({detail}; {:.1}s)\n", started.elapsed().as_secs_f64());
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}

fn s(x: u64) -> Micros {
    Micros::from_secs(x)
}

fn workload(load: f64, jobs: usize, workers: u32, seed: u64) -> Vec<Job> {
    generate(&SyntheticSpec::heterogeneous(load, jobs, seed), workers).jobs
}

fn simulate(algo: Algorithm, workers: u32, jobs: Vec<Job>, seed: u64) -> RunResult {
    run(&SimConfig::new(algo, workers, 10, seed), jobs).expect("simulation completes")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

#[test]
fn criterion_01_shared_state_examples() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = Vec::new();

    let mut a = Aggregate::new(1500, s(25_000));
    let u = a.finish(s(20));
    checks.push(a == Aggregate::new(1499, s(24_980)));
    checks.push(u == PeerUpdate { sign: Sign::Minus, count: 1, load: s(20) });

    let mut a = Aggregate::new(1500, s(25_000));
    let u = a.admit(10, s(15));
    checks.push(a == Aggregate::new(1510, s(25_150)));
    checks.push(u == PeerUpdate { sign: Sign::Plus, count: 10, load: s(150) });

    let st = Aggregate::new(1500, s(25_150)).shared_state(100, Version::default());
    checks.push(st.probe_quota == 15);
    checks.push(st.load_quota == Micros::from_secs_f64(251.5));

    // The same updates driven through a scheduler, including the broadcast.
    let cfg = SimConfig::new(Algorithm::Peacock, 100, 2, 0);
    let mut sched = Scheduler::new(0, &cfg);
    let mut out = Vec::new();
    let job = common::single_stage(1, Micros::ZERO, &[15.0; 10]);
    sched.set_aggregate(Aggregate::new(1500, s(25_000)));
    sched.on_job_arrival(&mut Ctx { now: Micros::ZERO, out: &mut out }, job, None).unwrap();
    checks.push(sched.aggregate() == Aggregate::new(1510, s(25_150)));
    let peer = |out: &[peacock_core::message::Outgoing]| {
        out.iter()
            .filter_map(|o| match (&o.to, &o.payload) {
                (Entity::Scheduler(1), Payload::PeerUpdate(u)) => Some(*u),
                _ => None,
            })
            .collect::<Vec<_>>()
    };
    checks.push(peer(&out) == vec![PeerUpdate { sign: Sign::Plus, count: 10, load: s(150) }]);

    let mut sched = Scheduler::new(0, &cfg);
    out.clear();
    let job = common::single_stage(2, Micros::ZERO, &[20.0]);
    sched.on_job_arrival(&mut Ctx { now: Micros::ZERO, out: &mut out }, job, None).unwrap();
    let key = ProbeKey { job: 2, stage: 0, index: 0 };
    sched.on_task_request(&mut Ctx { now: Micros::ZERO, out: &mut out }, key, 0, 0).unwrap();
    sched.set_aggregate(Aggregate::new(1500, s(25_000)));
    out.clear();
    let task = TaskRef { job: 2, stage: 0, task: 0 };
    let rec = sched.on_task_finish(&mut Ctx { now: s(20), out: &mut out }, task, 0, s(20), None).unwrap();
    checks.push(rec.is_some());
    checks.push(sched.aggregate() == Aggregate::new(1499, s(24_980)));
    checks.push(peer(&out) == vec![PeerUpdate { sign: Sign::Minus, count: 1, load: s(20) }]);

    let ok = checks.iter().all(|&c| c) && t.elapsed() < Duration::from_secs(1);
    let passed = checks.iter().filter(|&&c| c).count();
    assert!(verdict(1, ok, &format!("{passed}/{} checks", checks.len()), t));
}

fn to_probe(r: &RefProbe) -> Probe {
    let key = ProbeKey { job: r.id as u64, stage: 0, index: r.id };
    Probe::new(key, 0, Micros(r.lambda), Micros(r.theta), Micros(r.mu)).unwrap()
}

#[test]
fn criterion_02_oracle_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let cases = 1000;
    for case in 0..cases {
        let n = rng.random_range(0..=8usize);
        // Alternate coarse values (many ties) with fine-grained ones.
        let unit = if case % 2 == 0 { 1_000_000 } else { 1 };
        let scale = if case % 2 == 0 { 1 } else { 1_000_000 };
        let draw = |id: u32, rng: &mut ChaCha8Rng| RefProbe {
            id,
            lambda: rng.random_range(0..40 * scale) * unit,
            theta: rng.random_range(1..20 * scale) * unit,
            mu: rng.random_range(0..50 * scale) * unit,
        };
        let entries: Vec<RefProbe> = (0..n as u32).map(|i| draw(i, &mut rng)).collect();
        let p = draw(100, &mut rng);
        let tau = rng.random_range(0..80 * scale) * unit;
        let delta = rng.random_range(0..25 * scale) * unit;
        let phi = rng.random_range(0..12);
        let omega = rng.random_range(0..150 * scale) * unit;
        let want = ref_enqueue(&entries, p, tau, delta, phi, omega, RefRule::Guarded);
        let mut q = WaitingQueue::from_probes(BypassRule::Guarded, entries.iter().map(to_probe));
        let st = SharedState { probe_quota: phi, load_quota: Micros(omega), ..Default::default() };
        let got = q.enqueue_probe(to_probe(&p), Micros(tau), Micros(delta), &st).unwrap();
        let placed = match got.placement {
            Placement::Inserted(i) => Some(i),
            Placement::Rotated => None,
        };
        let order: Vec<u32> = q.entries().map(|e| e.key.index).collect();
        let evicted: Vec<u32> = got.evicted.iter().map(|e| e.key.index).collect();
        if placed != want.placed || order != want.queue || evicted != want.evicted {
            mismatches += 1;
        }
    }
    let ok = mismatches == 0 && t.elapsed() < Duration::from_secs(10);
    assert!(verdict(2, ok, &format!("{mismatches} mismatches in {cases} random queues"), t));
}

struct StarvationTrial {
    expired_before_start: bool,
    receded: bool,
    starved: bool,
    late_by: Micros,
}

/// One worker, a long probe queued behind a running task and a few short
/// probes, then a stream of short probes (some older than the long one) that
/// would keep bypassing it forever if nothing stopped them.
fn starvation_trial(rule: BypassRule, seed: u64) -> StarvationTrial {
    const MAX_ARRIVALS: u64 = 100_000;
    const ONE_TASK: Micros = Micros::from_secs(10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(1.0 / 1.5).unwrap();
    let unlimited = SharedState { probe_quota: u64::MAX, load_quota: Micros::MAX, ..Default::default() };
    let short = |id: u64, now: Micros, rng: &mut ChaCha8Rng| {
        let key = ProbeKey { job: id, stage: 0, index: 0 };
        let lambda = now.saturating_sub(Micros::from_secs_f64(rng.random_range(0.0..60.0)));
        let theta = Micros::from_secs_f64(rng.random_range(1.0..10.0));
        let mu = Micros::from_secs_f64(rng.random_range(0.0..100.0));
        Probe::new(key, 0, lambda, theta, mu).unwrap()
    };
    let long_key = ProbeKey { job: 0, stage: 0, index: 0 };
    let long_mu = Micros::from_secs_f64(rng.random_range(0.0..40.0));
    let long = Probe::new(long_key, 0, Micros::ZERO, s(60), long_mu).unwrap();
    let deadline = long.deadline();
    let ahead = rng.random_range(0..5u64);
    let initial: Vec<Probe> = (1..=ahead).map(|id| short(id, Micros::ZERO, &mut rng)).collect();
    let mut q = WaitingQueue::from_probes(rule, initial.into_iter().chain([long]));

    let mut running_until = Micros::from_secs_f64(rng.random_range(1.0..30.0));
    let mut next_arrival = Micros::from_secs_f64(gaps.sample(&mut rng));
    let mut next_id = ahead + 1;
    let mut bound: Option<Micros> = None;
    let mut receded = false;
    loop {
        // Snapshot at the instant of expiry: work still ahead of the probe.
        if bound.is_none() && deadline <= next_arrival.min(running_until) {
            let pos = q.position_of(&long_key).unwrap();
            let ahead: Micros = q.entries().take(pos).map(|p| p.runtime_estimate).sum();
            bound = Some(deadline.max(running_until) + ahead + ONE_TASK);
        }
        if running_until <= next_arrival {
            let now = running_until;
            let head = q.pop_head().expect("long probe still queued");
            if head.key == long_key {
                return StarvationTrial {
                    expired_before_start: now > deadline,
                    receded,
                    starved: false,
                    late_by: bound.map_or(Micros::ZERO, |b| now.saturating_sub(b)),
                };
            }
            running_until = now + head.runtime_estimate;
        } else if next_id > MAX_ARRIVALS {
            return StarvationTrial { expired_before_start: true, receded, starved: true, late_by: Micros::ZERO };
        } else {
            let now = next_arrival;
            next_arrival = now + Micros::from_secs_f64(gaps.sample(&mut rng));
            let probe = short(next_id, now, &mut rng);
            next_id += 1;
            let before = q.position_of(&long_key).unwrap();
            q.enqueue_probe(probe, now, running_until - now, &unlimited).unwrap();
            q.take_rotating();
            let after = q.position_of(&long_key).unwrap();
            if now >= deadline && after > before {
                receded = true;
            }
        }
    }
}

#[test]
fn criterion_03_starvation_freedom() {
    let _g = serial();
    let t = Instant::now();
    let trials: Vec<StarvationTrial> = (0..100).map(|seed| starvation_trial(BypassRule::Guarded, seed)).collect();
    let expired = trials.iter().filter(|r| r.expired_before_start).count();
    let receded = trials.iter().filter(|r| r.receded).count();
    let late = trials.iter().filter(|r| r.starved || r.late_by > Micros::ZERO).count();
    let ok = receded == 0 && late == 0 && expired > 0 && t.elapsed() < Duration::from_secs(30);
    let detail = format!("{expired}/100 trials expired while waiting, {receded} receded, {late} started late");
    assert!(verdict(3, ok, &detail, t));
}

/// Negative control: the literal bypass test lets the same stream starve the
/// long probe, so the trial above is able to tell the two apart.
#[test]
fn literal_rule_starves_under_the_same_stream() {
    let starved = (0..20).filter(|&seed| starvation_trial(BypassRule::Literal, seed).starved).count();
    assert!(starved > 0);
}

fn sorted_jct(r: &RunResult) -> Vec<(u64, Micros)> {
    let mut v: Vec<_> = r.records.iter().map(|x| (x.job_id, x.jct)).collect();
    v.sort();
    v
}

#[test]
fn criterion_04_hand_traced_fixtures() {
    let _g = serial();
    let t = Instant::now();
    let mut ok = true;

    let (cfg, jobs) = common::fixture_two_workers();
    let r = run(&cfg, jobs).unwrap();
    let want: Vec<(u64, Micros)> =
        common::FIXTURE_TWO_WORKERS_JCT.iter().enumerate().map(|(i, &x)| (i as u64, common::secs(x))).collect();
    ok &= sorted_jct(&r) == want;

    let (cfg, jobs) = common::fixture_three_workers();
    let r = run(&cfg, jobs).unwrap();
    let want: Vec<(u64, Micros)> =
        common::FIXTURE_THREE_WORKERS_JCT.iter().enumerate().map(|(i, &x)| (i as u64, common::secs(x))).collect();
    ok &= sorted_jct(&r) == want;
    for rec in &r.records {
        let mut got = rec.rotations.clone();
        got.sort();
        ok &= got == common::FIXTURE_THREE_WORKERS_ROTATIONS[rec.job_id as usize];
    }

    ok &= t.elapsed() < Duration::from_secs(1);
    assert!(verdict(4, ok, "two- and three-worker traces", t));
}

#[test]
fn criterion_05_conservation_and_quiescence() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let algos = [Algorithm::Peacock, Algorithm::Sparrow, Algorithm::Eagle];
    let mut plans: Vec<(Algorithm, u32, u32, f64, usize, u32)> = (0..24)
        .map(|i| {
            let workers = rng.random_range(1..=200);
            let schedulers = rng.random_range(1..=12);
            let load = rng.random_range(0.1..2.5);
            let jobs = rng.random_range(20..=1500);
            let stages = if i % 3 == 0 { 3 } else { 1 };
            (algos[i % 3], workers, schedulers, load, jobs, stages)
        })
        .collect();
    for algo in algos {
        plans.push((algo, 500, 10, 0.9, 20_000, 1));
    }
    let mut failures = Vec::new();
    for (i, &(algo, workers, schedulers, load, n, stages)) in plans.iter().enumerate() {
        let mut spec = SyntheticSpec::heterogeneous(load, n, 100 + i as u64);
        spec.stages_per_job = stages;
        let jobs = generate(&spec, workers).jobs;
        let tasks: usize = jobs.iter().map(Job::task_count).sum();
        let cfg = SimConfig::new(algo, workers, schedulers, i as u64);
        match run(&cfg, jobs.clone()) {
            Ok(r) => {
                let mut ids: Vec<u64> = r.records.iter().map(|x| x.job_id).collect();
                ids.sort();
                ids.dedup();
                let per_job_ok = r.records.iter().all(|rec| {
                    let job = &jobs.iter().find(|j| j.id == rec.job_id).unwrap();
                    rec.tasks as usize == job.task_count()
                        && rec.rotations.len() == job.task_count()
                        && rec.jct >= job.critical_path()
                });
                if ids.len() != jobs.len() || r.counters.tasks as usize != tasks || !per_job_ok {
                    failures.push(format!("run {i} ({algo}) lost or duplicated work"));
                }
            }
            Err(e) => failures.push(format!("run {i} ({algo}): {e}")),
        }
    }
    for f in &failures {
        println!("  {f}");
    }
    let ok = failures.is_empty() && t.elapsed() < Duration::from_secs(120);
    assert!(verdict(5, ok, &format!("{} randomized runs, {} failed", plans.len(), failures.len()), t));
}

fn rotations_per_probe(workers: u32, load: f64, jobs: usize, seeds: &[u64]) -> f64 {
    let per_seed: Vec<f64> = seeds
        .iter()
        .map(|&seed| {
            let r = simulate(Algorithm::Peacock, workers, workload(load, jobs, workers, seed), seed);
            r.counters.rotations as f64 / r.counters.probes as f64
        })
        .collect();
    mean(&per_seed)
}

const TREND_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[test]
fn criterion_06_rotations_grow_with_load() {
    let _g = serial();
    let t = Instant::now();
    let loads = [0.2, 0.5, 0.8, 1.0, 2.0, 3.0];
    let rpp: Vec<f64> = loads.iter().map(|&l| rotations_per_probe(500, l, 5000, &TREND_SEEDS)).collect();
    let ok = rpp.windows(2).all(|w| w[1] > w[0]) && t.elapsed() < Duration::from_secs(300);
    assert!(verdict(6, ok, &format!("rotations per probe at loads {loads:?}: [{}]", fmt(&rpp)), t));
}

#[test]
fn criterion_07_rotations_shrink_with_cluster_size() {
    let _g = serial();
    let t = Instant::now();
    let sizes = [250, 500, 1000];
    let rpp: Vec<f64> = sizes.iter().map(|&w| rotations_per_probe(w, 0.8, 5000, &TREND_SEEDS)).collect();
    let ok = rpp.windows(2).all(|w| w[1] < w[0]) && t.elapsed() < Duration::from_secs(300);
    assert!(verdict(7, ok, &format!("rotations per probe at W={sizes:?}: [{}]", fmt(&rpp)), t));
}

#[test]
fn criterion_08_overload_comparison() {
    let _g = serial();
    let t = Instant::now();
    let mut ok = true;
    let mut rows = Vec::new();
    for seed in [7u64, 8, 9] {
        let jobs = workload(2.0, 10_000, 500, seed);
        let rp = simulate(Algorithm::Peacock, 500, jobs.clone(), seed);
        let rs = simulate(Algorithm::Sparrow, 500, jobs.clone(), seed);
        let re = simulate(Algorithm::Eagle, 500, jobs, seed);
        let ajct = |r: &RunResult| report_for(r, DEFAULT_CDF_POINTS).unwrap().ajct_s;
        let (p, sp, e) = (ajct(&rp), ajct(&rs), ajct(&re));
        let ff = fraction_faster(&rp.records, &rs.records).unwrap().0;
        ok &= p <= 0.9 * sp && p <= 0.9 * e && ff > 0.5;
        rows.push(format!("seed {seed}: AJCT {p:.0}/{sp:.0}/{e:.0}s, faster than sparrow {:.1}%", ff * 100.0));
    }
    ok &= t.elapsed() < Duration::from_secs(600);
    let detail = format!("peacock/sparrow/eagle, {}", rows.join("; "));
    assert!(verdict(8, ok, &detail, t));
}

#[test]
fn criterion_09_utilization_tracks_load() {
    let _g = serial();
    let t = Instant::now();
    let r = simulate(Algorithm::Peacock, 500, workload(0.5, 5000, 500, 11), 11);
    let u = report_for(&r, DEFAULT_CDF_POINTS).unwrap().utilization;
    let ok = (0.45..=0.55).contains(&u) && t.elapsed() < Duration::from_secs(60);
    assert!(verdict(9, ok, &format!("utilization {u:.3} at load 0.5"), t));
}

fn report_bytes(seed: u64) -> Vec<u8> {
    let jobs = workload(1.2, 2000, 200, seed);
    let mut bytes = Vec::new();
    for algo in [Algorithm::Peacock, Algorithm::Sparrow, Algorithm::Eagle] {
        let r = simulate(algo, 200, jobs.clone(), seed);
        write_json(&mut bytes, &report_for(&r, DEFAULT_CDF_POINTS).unwrap()).unwrap();
        write_records_csv(&mut bytes, &r.records).unwrap();
    }
    bytes
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let t = Instant::now();
    let first = report_bytes(42);
    let second = report_bytes(42);
    let other = report_bytes(43);
    let ok = first == second && first != other && t.elapsed() < Duration::from_secs(120);
    assert!(verdict(10, ok, &format!("{} report bytes compared", first.len()), t));
}
