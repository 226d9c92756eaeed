mod common;

use common::*;
use peacock_core::run;

fn jcts(cfg: &peacock_core::SimConfig, jobs: Vec<peacock_core::Job>) -> Vec<peacock_core::Micros> {
    run(cfg, jobs).unwrap().records.iter().map(|r| r.jct).collect()
}

#[test]
fn two_workers_three_jobs() {
    let (cfg, jobs) = fixture_two_workers();
    let want: Vec<_> = FIXTURE_TWO_WORKERS_JCT.iter().map(|&s| secs(s)).collect();
    assert_eq!(jcts(&cfg, jobs), want);
}

#[test]
fn three_workers_five_jobs() {
    let (cfg, jobs) = fixture_three_workers();
    let result = run(&cfg, jobs).unwrap();
    let got: Vec<_> = result.records.iter().map(|r| r.jct).collect();
    let want: Vec<_> = FIXTURE_THREE_WORKERS_JCT.iter().map(|&s| secs(s)).collect();
    assert_eq!(got, want);
    for (rec, hops) in result.records.iter().zip(FIXTURE_THREE_WORKERS_ROTATIONS) {
        let mut got = rec.rotations.clone();
        got.sort_unstable();
        assert_eq!(got, hops, "job {}", rec.job_id);
    }
}
