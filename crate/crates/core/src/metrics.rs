//! Per-job records and the summary report built from them.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::Algorithm;
use crate::engine::{Counters, MessageCounts, RunResult};
use crate::error::MetricsError;
use crate::ids::{JobId, SchedulerId};
use crate::time::Micros;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Default CDF grid: JCT values at every 5th percentile.
pub const DEFAULT_CDF_POINTS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: JobId,
    pub scheduler: SchedulerId,
    pub arrival: Micros,
    pub completion: Micros,
    pub jct: Micros,
    pub tasks: u32,
    /// Ring hops of each launched probe.
    pub rotations: Vec<u32>,
}

impl JobRecord {
    pub fn total_rotations(&self) -> u64 {
        self.rotations.iter().map(|&r| r as u64).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    /// Fraction of jobs with JCT at or below `jct_s`.
    pub fraction: f64,
    pub jct_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub algorithm: Option<Algorithm>,
    pub seed: Option<u64>,
    pub jobs: u64,
    pub tasks: u64,
    pub ajct_s: f64,
    pub p50_s: f64,
    pub p70_s: f64,
    pub p90_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
    pub cdf: Vec<CdfPoint>,
    pub probes: u64,
    pub rotations: u64,
    pub rotations_per_probe: f64,
    pub rotations_per_task: f64,
    pub utilization: f64,
    pub makespan_s: f64,
    pub messages: MessageCounts,
    pub messages_total: u64,
    pub events: u64,
}

/// Nearest-rank percentile of an ascending slice: the smallest value with at
/// least `p` percent of the samples at or below it.
pub fn percentile(sorted: &[Micros], p: f64) -> Micros {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Aggregates a run. `workers` scales utilization; `cdf_points` sets the grid.
pub fn summarize(
    records: &[JobRecord],
    counters: &Counters,
    workers: u32,
    cdf_points: usize,
) -> Result<Report, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut jcts: Vec<Micros> = records.iter().map(|r| r.jct).collect();
    jcts.sort_unstable();
    let n = jcts.len();
    let total: u128 = jcts.iter().map(|j| j.0 as u128).sum();
    let ajct_s = total as f64 / n as f64 / 1e6;
    let points = cdf_points.max(1);
    let cdf = (1..=points)
        .map(|i| {
            let fraction = i as f64 / points as f64;
            CdfPoint { fraction, jct_s: percentile(&jcts, fraction * 100.0).as_secs_f64() }
        })
        .collect();

    let first = records.iter().map(|r| r.arrival).min().unwrap_or_default();
    let last = records.iter().map(|r| r.completion).max().unwrap_or_default();
    let makespan = last.saturating_sub(first);
    let capacity = makespan.0 as u128 * workers as u128;
    let utilization = if capacity == 0 { 0.0 } else { counters.busy_time.0 as f64 / capacity as f64 };
    let tasks: u64 = records.iter().map(|r| r.tasks as u64).sum();
    let rotations: u64 = records.iter().map(|r| r.total_rotations()).sum();

    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: None,
        seed: None,
        jobs: n as u64,
        tasks,
        ajct_s,
        p50_s: percentile(&jcts, 50.0).as_secs_f64(),
        p70_s: percentile(&jcts, 70.0).as_secs_f64(),
        p90_s: percentile(&jcts, 90.0).as_secs_f64(),
        p99_s: percentile(&jcts, 99.0).as_secs_f64(),
        max_s: jcts[n - 1].as_secs_f64(),
        cdf,
        probes: counters.probes,
        rotations,
        rotations_per_probe: ratio(rotations, counters.probes),
        rotations_per_task: ratio(rotations, tasks),
        utilization,
        makespan_s: makespan.as_secs_f64(),
        messages: counters.messages,
        messages_total: counters.messages.total(),
        events: counters.events,
    })
}

/// Summarizes a whole run, tagging the report with its algorithm and seed.
pub fn report_for(run: &RunResult, cdf_points: usize) -> Result<Report, MetricsError> {
    let mut r = summarize(&run.records, &run.counters, run.workers, cdf_points)?;
    r.algorithm = Some(run.algorithm);
    r.seed = Some(run.seed);
    Ok(r)
}

/// Share of jobs finishing strictly faster in `a`, strictly faster in `b`,
/// and in exactly the same time.
pub fn fraction_faster(a: &[JobRecord], b: &[JobRecord]) -> Result<(f64, f64, f64), MetricsError> {
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    if a.len() != b.len() {
        return Err(MetricsError::MismatchedJobs(format!("{} vs {} jobs", a.len(), b.len())));
    }
    let other: BTreeMap<JobId, Micros> = b.iter().map(|r| (r.job_id, r.jct)).collect();
    if other.len() != b.len() {
        return Err(MetricsError::MismatchedJobs("duplicate job id".into()));
    }
    let (mut fa, mut fb, mut ties) = (0u64, 0u64, 0u64);
    for r in a {
        let jb = *other
            .get(&r.job_id)
            .ok_or_else(|| MetricsError::MismatchedJobs(format!("job {} missing from second run", r.job_id)))?;
        match r.jct.cmp(&jb) {
            std::cmp::Ordering::Less => fa += 1,
            std::cmp::Ordering::Greater => fb += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = a.len() as f64;
    // Ties take the remainder so the three shares sum to exactly one.
    let (sa, sb) = (fa as f64 / n, fb as f64 / n);
    Ok((sa, sb, if ties == 0 { 0.0 } else { 1.0 - sa - sb }))
}

pub fn write_json<W: Write>(out: W, value: &impl Serialize) -> Result<(), MetricsError> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(serde_json::Error::io)?;
    Ok(())
}

/// Flat CSV row for a report; the CDF is rendered as `;`-joined seconds.
#[derive(Serialize)]
struct ReportRow<'a> {
    schema_version: u32,
    algorithm: String,
    seed: String,
    jobs: u64,
    tasks: u64,
    ajct_s: f64,
    p50_s: f64,
    p70_s: f64,
    p90_s: f64,
    p99_s: f64,
    max_s: f64,
    cdf: &'a str,
    probes: u64,
    rotations: u64,
    rotations_per_probe: f64,
    rotations_per_task: f64,
    utilization: f64,
    makespan_s: f64,
    probe_submit: u64,
    rotation_batch: u64,
    task_request: u64,
    task_assign: u64,
    task_cancel: u64,
    task_finish_notify: u64,
    peer_update: u64,
    messages_total: u64,
    events: u64,
}

pub fn write_reports_csv<W: Write>(out: W, reports: &[Report]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let cdf = r.cdf.iter().map(|p| p.jct_s.to_string()).collect::<Vec<_>>().join(";");
        let m = &r.messages;
        w.serialize(ReportRow {
            schema_version: r.schema_version,
            algorithm: r.algorithm.map(|a| a.to_string()).unwrap_or_default(),
            seed: r.seed.map(|s| s.to_string()).unwrap_or_default(),
            jobs: r.jobs,
            tasks: r.tasks,
            ajct_s: r.ajct_s,
            p50_s: r.p50_s,
            p70_s: r.p70_s,
            p90_s: r.p90_s,
            p99_s: r.p99_s,
            max_s: r.max_s,
            cdf: &cdf,
            probes: r.probes,
            rotations: r.rotations,
            rotations_per_probe: r.rotations_per_probe,
            rotations_per_task: r.rotations_per_task,
            utilization: r.utilization,
            makespan_s: r.makespan_s,
            probe_submit: m.probe_submit,
            rotation_batch: m.rotation_batch,
            task_request: m.task_request,
            task_assign: m.task_assign,
            task_cancel: m.task_cancel,
            task_finish_notify: m.task_finish_notify,
            peer_update: m.peer_update,
            messages_total: r.messages_total,
            events: r.events,
        })?;
    }
    w.flush().map_err(|e| MetricsError::Csv(e.into()))?;
    Ok(())
}

pub fn write_records_csv<W: Write>(out: W, records: &[JobRecord]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["job_id", "scheduler", "arrival_us", "completion_us", "jct_us", "tasks", "rotations"])?;
    for r in records {
        w.write_record(&[
            r.job_id.to_string(),
            r.scheduler.to_string(),
            r.arrival.0.to_string(),
            r.completion.0.to_string(),
            r.jct.0.to_string(),
            r.tasks.to_string(),
            r.total_rotations().to_string(),
        ])?;
    }
    w.flush().map_err(|e| MetricsError::Csv(e.into()))?;
    Ok(())
}
