//! Scheduler state machine.
//!
//! A scheduler admits jobs, submits one probe per task (or more, for the
//! late-binding baselines) to sampled workers, hands out task data when a
//! worker asks for it, and tracks stage and job progress. Under Peacock it
//! also keeps the cluster aggregate (outstanding probes, outstanding
//! estimated work), exchanges signed updates with its peers and derives the
//! shared state piggybacked on everything it sends to workers.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;

use crate::baselines::{self, EagleCentral};
use crate::config::{Algorithm, EagleConfig, SimConfig, SparrowConfig, TargetPolicy};
use crate::elastic_queue::{Probe, SharedState, Version};
use crate::error::SimError;
use crate::ids::{Entity, JobId, ProbeKey, SchedulerId, TaskRef, WorkerId};
use crate::message::{Ctx, Payload, PeerUpdate, Sign};
use crate::metrics::JobRecord;
use crate::rng::{scheduler_rng, SimRng};
use crate::time::Micros;
use crate::workload::Job;

/// Outstanding probes and estimated work as seen by one scheduler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Aggregate {
    pub probe_count: u64,
    pub total_load: Micros,
}

impl Aggregate {
    pub fn new(probe_count: u64, total_load: Micros) -> Self {
        Aggregate { probe_count, total_load }
    }

    /// Adds a stage of `tasks` probes with per-task estimate `estimate`.
    pub fn admit(&mut self, tasks: u64, estimate: Micros) -> PeerUpdate {
        let u = PeerUpdate { sign: Sign::Plus, count: tasks, load: estimate * tasks };
        self.apply(&u);
        u
    }

    /// Removes one finished task.
    pub fn finish(&mut self, estimate: Micros) -> PeerUpdate {
        let u = PeerUpdate { sign: Sign::Minus, count: 1, load: estimate };
        self.apply(&u);
        u
    }

    /// Applies a signed update, flooring at zero.
    pub fn apply(&mut self, u: &PeerUpdate) {
        match u.sign {
            Sign::Plus => {
                self.probe_count += u.count;
                self.total_load += u.load;
            }
            Sign::Minus => {
                if u.count > self.probe_count || u.load > self.total_load {
                    log::warn!("aggregate {self:?} would go negative under {u:?}; clamping");
                }
                self.probe_count = self.probe_count.saturating_sub(u.count);
                self.total_load = self.total_load.saturating_sub(u.load);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.probe_count == 0 && self.total_load.is_zero()
    }

    /// φ = round-half-up(count / W), ω = load / W.
    pub fn shared_state(&self, workers: u32, version: Version) -> SharedState {
        assert!(workers >= 1);
        let w = workers as u64;
        SharedState {
            probe_quota: (2 * self.probe_count + w) / (2 * w),
            load_quota: Micros(self.total_load.0 / w),
            version,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TaskStatus {
    Pending,
    Launched,
    Finished,
}

#[derive(Debug)]
struct StageProgress {
    durations: Vec<Micros>,
    estimate: Micros,
    deps_left: usize,
    children: Vec<usize>,
    status: Vec<TaskStatus>,
    finished: usize,
    /// Late binding: next task to hand out.
    next_unlaunched: usize,
    late_binding: bool,
    long: bool,
    probes: u32,
    cancelled: u32,
}

impl StageProgress {
    /// Late-binding probes not yet answered with a task or a cancel.
    fn unanswered(&self) -> u32 {
        if self.late_binding {
            self.probes - self.next_unlaunched as u32 - self.cancelled
        } else {
            0
        }
    }
}

#[derive(Debug)]
struct JobProgress {
    arrival: Micros,
    stages: Vec<StageProgress>,
    stages_left: usize,
    last_finish: Micros,
    rotations: Vec<u32>,
}

/// Counters kept by one scheduler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SchedulerStats {
    pub probes: u64,
    pub launches: u64,
    pub cancels: u64,
    pub rotations: u64,
}

pub struct Scheduler {
    id: SchedulerId,
    schedulers: u32,
    workers: u32,
    algorithm: Algorithm,
    sparrow: SparrowConfig,
    eagle: EagleConfig,
    targets: TargetPolicy,
    rng: SimRng,
    cursor: u32,
    aggregate: Aggregate,
    version_counter: u64,
    jobs: HashMap<JobId, JobProgress>,
    /// Completed jobs that still have late-binding probes queued somewhere.
    draining: HashMap<JobId, u32>,
    stats: SchedulerStats,
}

impl Scheduler {
    pub fn new(id: SchedulerId, cfg: &SimConfig) -> Self {
        Scheduler {
            id,
            schedulers: cfg.schedulers,
            workers: cfg.workers,
            algorithm: cfg.algorithm,
            sparrow: cfg.sparrow.clone(),
            eagle: cfg.eagle.clone(),
            targets: cfg.targets,
            rng: scheduler_rng(cfg.seed, id),
            cursor: 0,
            aggregate: Aggregate::default(),
            version_counter: 0,
            jobs: HashMap::new(),
            draining: HashMap::new(),
            stats: SchedulerStats::default(),
        }
    }

    pub fn id(&self) -> SchedulerId {
        self.id
    }

    pub fn aggregate(&self) -> Aggregate {
        self.aggregate
    }

    pub fn set_aggregate(&mut self, aggregate: Aggregate) {
        self.aggregate = aggregate;
    }

    pub fn stats(&self) -> SchedulerStats {
        self.stats
    }

    /// Jobs still running or waiting for stray probes to be cancelled.
    pub fn open_jobs(&self) -> usize {
        self.jobs.len() + self.draining.len()
    }

    /// Derives the current shared state and stamps it with a fresh version.
    pub fn current_shared_state(&mut self, now: Micros) -> SharedState {
        self.version_counter += 1;
        let version = Version { time: now, scheduler: self.id, counter: self.version_counter };
        self.aggregate.shared_state(self.workers, version)
    }

    pub fn on_peer_update(&mut self, u: &PeerUpdate) {
        self.aggregate.apply(u);
    }

    pub fn on_job_arrival(
        &mut self,
        ctx: &mut Ctx<'_>,
        job: Job,
        central: Option<&mut EagleCentral>,
    ) -> Result<(), SimError> {
        job.validate().map_err(|reason| SimError::InvalidJob { job: job.id, reason })?;
        if self.jobs.contains_key(&job.id) {
            return Err(SimError::InvalidJob { job: job.id, reason: "duplicate job id".into() });
        }
        let mut stages: Vec<StageProgress> = job
            .stages
            .iter()
            .map(|s| StageProgress {
                estimate: s.estimate(),
                durations: s.durations.clone(),
                deps_left: s.deps.len(),
                children: Vec::new(),
                status: vec![TaskStatus::Pending; s.durations.len()],
                finished: 0,
                next_unlaunched: 0,
                late_binding: false,
                long: false,
                probes: 0,
                cancelled: 0,
            })
            .collect();
        for (i, s) in job.stages.iter().enumerate() {
            for &d in &s.deps {
                stages[d].children.push(i);
            }
        }
        let ready: Vec<usize> = (0..stages.len()).filter(|&i| stages[i].deps_left == 0).collect();
        let n_stages = stages.len();
        self.jobs.insert(
            job.id,
            JobProgress {
                arrival: job.arrival,
                stages,
                stages_left: n_stages,
                last_finish: Micros::ZERO,
                rotations: Vec::with_capacity(job.task_count()),
            },
        );
        let mut central = central;
        for s in ready {
            self.submit_stage(ctx, job.id, s, central.as_deref_mut())?;
        }
        Ok(())
    }

    /// Picks `n` target workers: distinct while `n ≤ W`, with replacement
    /// beyond.
    pub fn choose_targets(&mut self, n: usize) -> Vec<WorkerId> {
        choose_targets(&mut self.rng, self.targets, &mut self.cursor, n, self.workers, 0)
    }

    fn submit_stage(
        &mut self,
        ctx: &mut Ctx<'_>,
        job_id: JobId,
        stage_idx: usize,
        central: Option<&mut EagleCentral>,
    ) -> Result<(), SimError> {
        let now = ctx.now;
        let (n, estimate) = {
            let stage = &self.jobs[&job_id].stages[stage_idx];
            (stage.durations.len(), stage.estimate)
        };
        let key = |index: u32| ProbeKey { job: job_id, stage: stage_idx as u32, index };
        let placements: Vec<(WorkerId, Probe)> = match self.algorithm {
            Algorithm::Peacock => {
                let threshold = self.aggregate.shared_state(self.workers, Version::default()).load_quota;
                let update = self.aggregate.admit(n as u64, estimate);
                self.broadcast(ctx, update);
                let targets = self.choose_targets(n);
                let mut out = Vec::with_capacity(n);
                for (i, w) in targets.into_iter().enumerate() {
                    out.push((w, Probe::new(key(i as u32), self.id, now, estimate, threshold)?));
                }
                out
            }
            Algorithm::Sparrow => {
                let ratio = self.sparrow.probe_ratio;
                let targets = self.choose_targets(n * ratio as usize);
                baselines::sparrow_probes(&targets, self.id, job_id, stage_idx as u32, now, estimate)?
            }
            Algorithm::Eagle => {
                let central = central.ok_or_else(|| SimError::Config("eagle run without central scheduler".into()))?;
                let long = estimate > self.eagle.long_job_cutoff;
                let ratio = self.eagle.probe_ratio;
                let targets = if long { central.place(n, estimate) } else { self.choose_targets(n * ratio as usize) };
                baselines::eagle_probes(&targets, long, self.id, job_id, stage_idx as u32, now, estimate)?
            }
        };
        let stage = &mut self.jobs.get_mut(&job_id).expect("job exists").stages[stage_idx];
        stage.probes = placements.len() as u32;
        stage.long = placements.iter().any(|(_, p)| p.long);
        stage.late_binding = match self.algorithm {
            Algorithm::Peacock => false,
            Algorithm::Sparrow => true,
            Algorithm::Eagle => !stage.long,
        };
        self.stats.probes += placements.len() as u64;
        let piggyback = matches!(self.algorithm, Algorithm::Peacock).then(|| self.current_shared_state(now));
        for (w, probe) in placements {
            ctx.send(Entity::Worker(w), Payload::ProbeSubmit { probe, state: piggyback });
        }
        Ok(())
    }

    fn broadcast(&self, ctx: &mut Ctx<'_>, update: PeerUpdate) {
        for peer in (0..self.schedulers).filter(|&p| p != self.id) {
            ctx.send(Entity::Scheduler(peer), Payload::PeerUpdate(update));
        }
    }

    /// Answers a worker's request for the task behind `probe`.
    pub fn on_task_request(
        &mut self,
        ctx: &mut Ctx<'_>,
        probe: ProbeKey,
        worker: WorkerId,
        rotations: u32,
    ) -> Result<(), SimError> {
        let now = ctx.now;
        let unknown = || SimError::protocol(now, format!("task request for unknown probe {probe:?}"));
        if let Some(left) = self.draining.get_mut(&probe.job) {
            *left -= 1;
            if *left == 0 {
                self.draining.remove(&probe.job);
            }
            self.stats.cancels += 1;
            ctx.send(Entity::Worker(worker), Payload::TaskCancel { probe });
            return Ok(());
        }
        let job = self.jobs.get_mut(&probe.job).ok_or_else(unknown)?;
        let stage = job.stages.get_mut(probe.stage as usize).ok_or_else(unknown)?;
        if probe.index >= stage.probes {
            return Err(unknown());
        }
        let task = if stage.late_binding {
            if stage.next_unlaunched >= stage.durations.len() {
                stage.cancelled += 1;
                self.stats.cancels += 1;
                ctx.send(Entity::Worker(worker), Payload::TaskCancel { probe });
                return Ok(());
            }
            stage.next_unlaunched += 1;
            stage.next_unlaunched - 1
        } else {
            probe.index as usize
        };
        if stage.status[task] != TaskStatus::Pending {
            return Err(SimError::protocol(now, format!("task {task} of {probe:?} launched twice")));
        }
        stage.status[task] = TaskStatus::Launched;
        let duration = stage.durations[task];
        job.rotations.push(rotations);
        self.stats.launches += 1;
        self.stats.rotations += rotations as u64;
        let state = matches!(self.algorithm, Algorithm::Peacock).then(|| self.current_shared_state(now));
        let task = TaskRef { job: probe.job, stage: probe.stage, task: task as u32 };
        ctx.send(Entity::Worker(worker), Payload::TaskAssign { task, duration, state });
        Ok(())
    }

    /// Records a finished task; returns the job record when it was the
    /// job's last task.
    pub fn on_task_finish(
        &mut self,
        ctx: &mut Ctx<'_>,
        task: TaskRef,
        worker: WorkerId,
        finished_at: Micros,
        central: Option<&mut EagleCentral>,
    ) -> Result<Option<JobRecord>, SimError> {
        let now = ctx.now;
        let bad = |what: &str| SimError::protocol(now, format!("{what} for task {task:?}"));
        let job = self.jobs.get_mut(&task.job).ok_or_else(|| bad("finish of unknown job"))?;
        let stage_idx = task.stage as usize;
        let stage = job.stages.get_mut(stage_idx).ok_or_else(|| bad("finish of unknown stage"))?;
        let status = stage.status.get_mut(task.task as usize).ok_or_else(|| bad("finish of unknown task"))?;
        match *status {
            TaskStatus::Launched => *status = TaskStatus::Finished,
            TaskStatus::Finished => return Err(bad("double finish")),
            TaskStatus::Pending => return Err(bad("finish before launch")),
        }
        stage.finished += 1;
        let estimate = stage.estimate;
        let stage_done = stage.finished == stage.durations.len();
        let long = stage.long;
        job.last_finish = job.last_finish.max(finished_at);
        let mut central = central;
        if long {
            if let Some(c) = central.as_deref_mut() {
                c.release(worker, estimate);
            }
        }
        if matches!(self.algorithm, Algorithm::Peacock) {
            let update = self.aggregate.finish(estimate);
            self.broadcast(ctx, update);
        }
        if !stage_done {
            return Ok(None);
        }
        let job = self.jobs.get_mut(&task.job).expect("job exists");
        job.stages_left -= 1;
        if job.stages_left == 0 {
            let job = self.jobs.remove(&task.job).expect("job exists");
            let unanswered: u32 = job.stages.iter().map(StageProgress::unanswered).sum();
            if unanswered > 0 {
                self.draining.insert(task.job, unanswered);
            }
            return Ok(Some(JobRecord {
                job_id: task.job,
                scheduler: self.id,
                arrival: job.arrival,
                completion: job.last_finish,
                jct: job.last_finish - job.arrival,
                tasks: job.stages.iter().map(|s| s.durations.len() as u32).sum(),
                rotations: job.rotations,
            }));
        }
        let children = job.stages[stage_idx].children.clone();
        let mut ready = Vec::new();
        for c in children {
            let child = &mut job.stages[c];
            child.deps_left -= 1;
            if child.deps_left == 0 {
                ready.push(c);
            }
        }
        for c in ready {
            self.submit_stage(ctx, task.job, c, central.as_deref_mut())?;
        }
        Ok(None)
    }
}

/// Target selection shared by all algorithms. `offset` shifts the worker ids
/// (used to sample within a partition of `workers` ids starting there).
pub fn choose_targets(
    rng: &mut SimRng,
    policy: TargetPolicy,
    cursor: &mut u32,
    n: usize,
    workers: u32,
    offset: u32,
) -> Vec<WorkerId> {
    match policy {
        TargetPolicy::RoundRobin => (0..n)
            .map(|_| {
                let w = *cursor % workers;
                *cursor = (*cursor + 1) % workers;
                offset + w
            })
            .collect(),
        TargetPolicy::Random => {
            if n <= workers as usize {
                index::sample(rng, workers as usize, n).into_iter().map(|w| offset + w as u32).collect()
            } else {
                (0..n).map(|_| offset + rng.random_range(0..workers)).collect()
            }
        }
    }
}
