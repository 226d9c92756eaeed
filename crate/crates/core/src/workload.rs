//! Jobs, trace files and synthetic Poisson workloads.
//!
//! Trace files hold one JSON record per line:
//!
//! ```text
//! {"schema_version":1}
//! {"id":7,"submit_us":1500000,"stages":[{"durations_us":[68000000],"deps":[]}]}
//! ```
//!
//! The header line is optional on input. `submit_us` may be omitted, in which
//! case arrivals are generated. Gzip-compressed files are detected by their
//! magic bytes.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::TraceError;
use crate::ids::JobId;
use crate::rng::workload_rng;
use crate::time::Micros;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub durations: Vec<Micros>,
    /// Indices of stages that must finish first.
    pub deps: Vec<usize>,
}

impl Stage {
    pub fn single(durations: Vec<Micros>) -> Self {
        Stage { durations, deps: Vec::new() }
    }

    /// θ̂: mean task duration, rounded down, at least one microsecond.
    pub fn estimate(&self) -> Micros {
        let total: Micros = self.durations.iter().copied().sum();
        Micros((total.0 / self.durations.len().max(1) as u64).max(1))
    }

    pub fn work(&self) -> Micros {
        self.durations.iter().copied().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub arrival: Micros,
    pub stages: Vec<Stage>,
}

impl Job {
    pub fn task_count(&self) -> usize {
        self.stages.iter().map(|s| s.durations.len()).sum()
    }

    pub fn work(&self) -> Micros {
        self.stages.iter().map(Stage::work).sum()
    }

    /// Checks durations, dependency ranges and acyclicity.
    pub fn validate(&self) -> Result<(), String> {
        if self.stages.is_empty() {
            return Err("job has no stages".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.durations.is_empty() {
                return Err(format!("stage {i} has no tasks"));
            }
            if s.durations.iter().any(|d| d.is_zero()) {
                return Err(format!("stage {i} has a non-positive task duration"));
            }
            if let Some(d) = s.deps.iter().find(|&&d| d >= self.stages.len() || d == i) {
                return Err(format!("stage {i} has invalid dependency {d}"));
            }
        }
        if topological_order(&self.stages).is_none() {
            return Err("stage dependencies contain a cycle".into());
        }
        Ok(())
    }

    /// Length of the longest dependency chain, counting each stage as its
    /// longest task.
    pub fn critical_path(&self) -> Micros {
        let Some(order) = topological_order(&self.stages) else { return Micros::ZERO };
        let mut finish = vec![Micros::ZERO; self.stages.len()];
        for i in order {
            let start = self.stages[i].deps.iter().map(|&d| finish[d]).max().unwrap_or_default();
            let longest = self.stages[i].durations.iter().copied().max().unwrap_or_default();
            finish[i] = start + longest;
        }
        finish.into_iter().max().unwrap_or_default()
    }
}

fn topological_order(stages: &[Stage]) -> Option<Vec<usize>> {
    let n = stages.len();
    let mut indegree: Vec<usize> = stages.iter().map(|s| s.deps.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (i, s) in stages.iter().enumerate() {
        for &d in &s.deps {
            if d >= n {
                return None;
            }
            children[d].push(i);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: JobId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submit_us: Option<u64>,
    pub stages: Vec<TraceStage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStage {
    pub durations_us: Vec<i64>,
    #[serde(default)]
    pub deps: Vec<usize>,
}

impl TraceRecord {
    pub fn from_job(job: &Job) -> Self {
        TraceRecord {
            id: job.id,
            submit_us: Some(job.arrival.0),
            stages: job
                .stages
                .iter()
                .map(|s| TraceStage {
                    durations_us: s.durations.iter().map(|d| d.0 as i64).collect(),
                    deps: s.deps.clone(),
                })
                .collect(),
        }
    }

    /// Converts to a job, or `None` if any duration is non-positive or the
    /// dependency graph is invalid.
    pub fn to_job(&self) -> Option<Job> {
        let mut stages = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            if s.durations_us.iter().any(|&d| d <= 0) {
                return None;
            }
            stages.push(Stage {
                durations: s.durations_us.iter().map(|&d| Micros(d as u64)).collect(),
                deps: s.deps.clone(),
            });
        }
        let job = Job { id: self.id, arrival: Micros(self.submit_us.unwrap_or(0)), stages };
        job.validate().ok().map(|_| job)
    }
}

/// Records parsed from a trace plus how many were pruned.
#[derive(Clone, Debug, Default)]
pub struct LoadedTrace {
    pub records: Vec<TraceRecord>,
    pub pruned: usize,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
}

/// Reads a trace file, plain or gzip-compressed.
pub fn load_trace(path: impl AsRef<Path>) -> Result<LoadedTrace, TraceError> {
    let path = path.as_ref();
    let mut magic = [0u8; 2];
    let n = File::open(path)?.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        read_trace(BufReader::new(GzDecoder::new(file)))
    } else {
        read_trace(BufReader::new(file))
    }
}

/// Parses trace lines. Malformed JSON is fatal; semantically invalid jobs
/// (non-positive durations, bad dependencies, duplicate ids) are pruned.
pub fn read_trace(reader: impl BufRead) -> Result<LoadedTrace, TraceError> {
    let mut out = LoadedTrace::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.contains("\"schema_version\"") {
            let header: Header = serde_json::from_str(trimmed)
                .map_err(|e| TraceError::Malformed { line: lineno, message: e.to_string() })?;
            if header.schema_version != TRACE_SCHEMA_VERSION {
                return Err(TraceError::Malformed {
                    line: lineno,
                    message: format!("unsupported schema version {}", header.schema_version),
                });
            }
            continue;
        }
        let record: TraceRecord = serde_json::from_str(trimmed)
            .map_err(|e| TraceError::Malformed { line: lineno, message: e.to_string() })?;
        if record.to_job().is_none() || !seen.insert(record.id) {
            out.pruned += 1;
            continue;
        }
        out.records.push(record);
    }
    if out.pruned > 0 {
        log::info!("pruned {} invalid trace records", out.pruned);
    }
    Ok(out)
}

pub fn write_trace(mut w: impl Write, jobs: &[Job]) -> std::io::Result<()> {
    writeln!(w, "{{\"schema_version\":{TRACE_SCHEMA_VERSION}}}")?;
    for job in jobs {
        let line = serde_json::to_string(&TraceRecord::from_job(job)).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Mean job inter-arrival time that offers `load` times the capacity of
/// `workers` single-slot workers: m̄·d̄ / (ρ·W).
pub fn mean_interarrival(load: f64, workers: u32, mean_tasks: f64, mean_duration: Micros) -> Micros {
    assert!(load > 0.0 && workers > 0 && mean_tasks > 0.0, "inputs must be positive");
    Micros::from_secs_f64(mean_tasks * mean_duration.as_secs_f64() / (load * workers as f64))
}

/// Stamps Poisson arrivals onto `jobs` (sorted afterwards by arrival),
/// calibrated from the jobs' own mean task count and duration.
pub fn assign_arrivals(jobs: &mut [Job], load: f64, workers: u32, seed: u64) {
    if jobs.is_empty() {
        return;
    }
    let tasks: usize = jobs.iter().map(Job::task_count).sum();
    let work: Micros = jobs.iter().map(Job::work).sum();
    let mean_tasks = tasks as f64 / jobs.len() as f64;
    let mean_duration = Micros(work.0 / tasks as u64);
    let gap = mean_interarrival(load, workers, mean_tasks, mean_duration);
    let exp = Exp::new(1.0 / gap.as_secs_f64().max(1e-9)).expect("positive rate");
    let mut rng = workload_rng(seed ^ 0x5eed_a771);
    let mut t = 0.0;
    for job in jobs.iter_mut() {
        t += exp.sample(&mut rng);
        job.arrival = Micros::from_secs_f64(t);
    }
}

/// Converts trace records to jobs, generating arrivals when any record lacks
/// a submit time.
pub fn jobs_from_trace(records: &[TraceRecord], load: f64, workers: u32, seed: u64) -> Vec<Job> {
    let mut jobs: Vec<Job> = records.iter().filter_map(TraceRecord::to_job).collect();
    if records.iter().any(|r| r.submit_us.is_none()) {
        assign_arrivals(&mut jobs, load, workers, seed);
    }
    jobs.sort_by_key(|j| (j.arrival, j.id));
    jobs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountDist {
    Fixed {
        n: u32,
    },
    Uniform {
        min: u32,
        max: u32,
    },
    /// Rounded lognormal clamped to `[1, max]`.
    LogNormal {
        median: f64,
        sigma: f64,
        max: u32,
    },
}

impl CountDist {
    fn sample(&self, rng: &mut impl Rng) -> u32 {
        match *self {
            CountDist::Fixed { n } => n.max(1),
            CountDist::Uniform { min, max } => rng.random_range(min.max(1)..=max.max(min.max(1))),
            CountDist::LogNormal { median, sigma, max } => {
                let d = LogNormal::new(median.ln(), sigma).expect("valid lognormal");
                (d.sample(rng).round() as u32).clamp(1, max.max(1))
            }
        }
    }
}

/// Distribution of a job's mean task duration, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationDist {
    Fixed { secs: f64 },
    Exponential { mean_secs: f64 },
    LogNormal { median_secs: f64, sigma: f64 },
}

impl DurationDist {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            DurationDist::Fixed { secs } => secs,
            DurationDist::Exponential { mean_secs } => Exp::new(1.0 / mean_secs).expect("positive mean").sample(rng),
            DurationDist::LogNormal { median_secs, sigma } => {
                LogNormal::new(median_secs.ln(), sigma).expect("valid lognormal").sample(rng)
            }
        }
    }
}

/// One component of a job mix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobClass {
    pub name: String,
    pub weight: f64,
    pub tasks: CountDist,
    pub duration: DurationDist,
    /// Lognormal sigma of task durations around the job's mean.
    pub task_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub target_load: f64,
    pub job_count: usize,
    pub classes: Vec<JobClass>,
    /// Stages per job, chained one after another.
    pub stages_per_job: u32,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Heavy-tailed two-class mix: 90% short jobs, 10% long jobs.
    pub fn heterogeneous(target_load: f64, job_count: usize, seed: u64) -> Self {
        SyntheticSpec {
            target_load,
            job_count,
            classes: vec![
                JobClass {
                    name: "short".into(),
                    weight: 0.9,
                    tasks: CountDist::LogNormal { median: 8.0, sigma: 0.8, max: 200 },
                    duration: DurationDist::LogNormal { median_secs: 5.0, sigma: 0.8 },
                    task_spread: 0.3,
                },
                JobClass {
                    name: "long".into(),
                    weight: 0.1,
                    tasks: CountDist::LogNormal { median: 30.0, sigma: 0.8, max: 400 },
                    duration: DurationDist::LogNormal { median_secs: 100.0, sigma: 0.6 },
                    task_spread: 0.3,
                },
            ],
            stages_per_job: 1,
            seed,
        }
    }

    /// Single lognormal class.
    pub fn homogeneous(target_load: f64, job_count: usize, seed: u64) -> Self {
        SyntheticSpec {
            target_load,
            job_count,
            classes: vec![JobClass {
                name: "all".into(),
                weight: 1.0,
                tasks: CountDist::LogNormal { median: 10.0, sigma: 0.6, max: 100 },
                duration: DurationDist::LogNormal { median_secs: 10.0, sigma: 1.0 },
                task_spread: 0.3,
            }],
            stages_per_job: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.target_load.is_finite() || self.target_load <= 0.0 {
            return Err("target load must be positive".into());
        }
        if self.classes.is_empty() || self.classes.iter().any(|c| !c.weight.is_finite() || c.weight <= 0.0) {
            return Err("job mix needs at least one class with positive weight".into());
        }
        Ok(())
    }
}

/// A generated job tagged with the mix class it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub jobs: Vec<Job>,
    pub classes: Vec<usize>,
}

/// Draws job shapes, then stamps Poisson arrivals at the target load.
pub fn generate(spec: &SyntheticSpec, workers: u32) -> Generated {
    let mut rng = workload_rng(spec.seed);
    let total_weight: f64 = spec.classes.iter().map(|c| c.weight).sum();
    let mut jobs = Vec::with_capacity(spec.job_count);
    let mut classes = Vec::with_capacity(spec.job_count);
    for id in 0..spec.job_count {
        let mut pick = rng.random::<f64>() * total_weight;
        let mut class = spec.classes.len() - 1;
        for (i, c) in spec.classes.iter().enumerate() {
            if pick < c.weight {
                class = i;
                break;
            }
            pick -= c.weight;
        }
        let c = &spec.classes[class];
        let spread =
            LogNormal::new(-c.task_spread * c.task_spread / 2.0, c.task_spread.max(1e-12)).expect("valid spread");
        let stages = (0..spec.stages_per_job.max(1) as usize)
            .map(|s| {
                let n = c.tasks.sample(&mut rng);
                let mean = c.duration.sample(&mut rng);
                let durations = (0..n)
                    .map(|_| {
                        let d = if c.task_spread > 0.0 { mean * spread.sample(&mut rng) } else { mean };
                        Micros::from_secs_f64(d).max(Micros(1))
                    })
                    .collect();
                Stage { durations, deps: if s == 0 { Vec::new() } else { vec![s - 1] } }
            })
            .collect();
        jobs.push(Job { id: id as JobId, arrival: Micros::ZERO, stages });
        classes.push(class);
    }
    let mean_tasks = jobs.iter().map(Job::task_count).sum::<usize>() as f64 / jobs.len().max(1) as f64;
    let tasks: usize = jobs.iter().map(Job::task_count).sum();
    let work: Micros = jobs.iter().map(Job::work).sum();
    if tasks > 0 {
        let gap = mean_interarrival(spec.target_load, workers, mean_tasks, Micros(work.0 / tasks as u64));
        let exp = Exp::new(1.0 / gap.as_secs_f64().max(1e-9)).expect("positive rate");
        let mut t = 0.0;
        for job in &mut jobs {
            t += exp.sample(&mut rng);
            job.arrival = Micros::from_secs_f64(t);
        }
    }
    Generated { jobs, classes }
}
