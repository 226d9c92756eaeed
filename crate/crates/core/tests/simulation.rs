//! End-to-end properties of whole simulated runs on small clusters.

use peacock_core::metrics::percentile;
use peacock_core::{
    generate, report_for, run, Algorithm, BypassRule, Job, Micros, SimConfig, SimError, Stage, SyntheticSpec,
};
use proptest::prelude::*;

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![Just(Algorithm::Peacock), Just(Algorithm::Sparrow), Just(Algorithm::Eagle)]
}

#[derive(Clone, Debug)]
struct Case {
    algo: Algorithm,
    workers: u32,
    schedulers: u32,
    load: f64,
    jobs: usize,
    stages: u32,
    seed: u64,
    literal: bool,
    jitter: bool,
}

fn case() -> impl Strategy<Value = Case> {
    (algorithm(), 1u32..40, 1u32..6, 0.1f64..3.0, 1usize..120, 1u32..4, any::<u64>(), any::<bool>(), any::<bool>())
        .prop_map(|(algo, workers, schedulers, load, jobs, stages, seed, literal, jitter)| Case {
            algo,
            workers,
            schedulers,
            load,
            jobs,
            stages,
            seed,
            literal,
            jitter,
        })
}

fn setup(c: &Case) -> (SimConfig, Vec<Job>) {
    let mut spec = SyntheticSpec::heterogeneous(c.load, c.jobs, c.seed);
    spec.stages_per_job = c.stages;
    let mut cfg = SimConfig::new(c.algo, c.workers, c.schedulers, c.seed);
    if c.literal {
        cfg.peacock.bypass_rule = BypassRule::Literal;
    }
    cfg.tick_jitter = c.jitter;
    (cfg, generate(&spec, c.workers).jobs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_job_completes_once_after_its_critical_path(c in case()) {
        let (cfg, jobs) = setup(&c);
        let r = run(&cfg, jobs.clone()).unwrap();
        prop_assert_eq!(r.records.len(), jobs.len());
        let tasks: u64 = jobs.iter().map(|j| j.task_count() as u64).sum();
        prop_assert_eq!(r.counters.tasks, tasks);
        prop_assert_eq!(r.counters.launches, tasks);
        let work: Micros = jobs.iter().map(Job::work).sum();
        prop_assert_eq!(r.counters.busy_time, work);
        for (rec, job) in r.records.iter().zip(&jobs) {
            prop_assert_eq!(rec.job_id, job.id);
            prop_assert_eq!(rec.arrival, job.arrival);
            prop_assert_eq!(rec.jct, rec.completion - rec.arrival);
            prop_assert!(rec.jct >= job.critical_path());
            prop_assert_eq!(rec.rotations.len(), job.task_count());
        }
    }

    #[test]
    fn identical_inputs_give_identical_results(c in case()) {
        let (cfg, jobs) = setup(&c);
        prop_assert_eq!(run(&cfg, jobs.clone()).unwrap(), run(&cfg, jobs).unwrap());
    }

    /// Every report field that depends only on the job records can be
    /// recomputed from them.
    #[test]
    fn report_is_recomputable_from_records(c in case()) {
        let (cfg, jobs) = setup(&c);
        let r = run(&cfg, jobs).unwrap();
        let rep = report_for(&r, 10).unwrap();
        let mut jcts: Vec<Micros> = r.records.iter().map(|x| x.jct).collect();
        jcts.sort();
        let mean = jcts.iter().map(|j| j.as_secs_f64()).sum::<f64>() / jcts.len() as f64;
        prop_assert!((rep.ajct_s - mean).abs() <= 1e-9 * mean.max(1.0));
        prop_assert_eq!(rep.p90_s, percentile(&jcts, 90.0).as_secs_f64());
        prop_assert_eq!(rep.max_s, jcts.last().unwrap().as_secs_f64());
        let hops: u64 = r.records.iter().flat_map(|x| x.rotations.iter()).map(|&h| h as u64).sum();
        prop_assert_eq!(rep.rotations, hops);
        prop_assert_eq!(rep.rotations, r.counters.rotations);
        prop_assert!(rep.utilization <= 1.0 + 1e-12);
        prop_assert_eq!(rep.messages_total, r.counters.messages.total());
    }
}

#[test]
fn baselines_never_rotate() {
    for algo in [Algorithm::Sparrow, Algorithm::Eagle] {
        let jobs = generate(&SyntheticSpec::heterogeneous(2.0, 300, 1), 20).jobs;
        let r = run(&SimConfig::new(algo, 20, 3, 1), jobs).unwrap();
        assert_eq!(r.counters.rotations, 0);
        assert_eq!(r.counters.messages.rotation_batch, 0);
        assert_eq!(r.counters.launches + r.counters.cancels, r.counters.probes);
    }
}

#[test]
fn idle_cluster_has_no_rotations_and_minimal_jct() {
    let jobs: Vec<Job> = (0..5)
        .map(|i| Job {
            id: i,
            arrival: Micros::from_secs(100 * i),
            stages: vec![Stage::single(vec![Micros::from_secs(4); 3])],
        })
        .collect();
    let mut cfg = SimConfig::new(Algorithm::Peacock, 50, 2, 0);
    cfg.network_delay = Micros::from_millis(5);
    let r = run(&cfg, jobs).unwrap();
    assert_eq!(r.counters.rotations, 0);
    // Probe submit, task request and task assign each cost one delay.
    assert!(r.records.iter().all(|x| x.jct == Micros::from_secs(4) + Micros::from_millis(15)));
}

#[test]
fn non_termination_is_reported() {
    let jobs = generate(&SyntheticSpec::heterogeneous(1.0, 50, 2), 5).jobs;
    let mut cfg = SimConfig::new(Algorithm::Peacock, 5, 1, 2);
    cfg.max_events = 100;
    assert!(matches!(run(&cfg, jobs), Err(SimError::NonTermination { .. })));
}
