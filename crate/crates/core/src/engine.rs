//! Deterministic discrete-event core.
//!
//! Events are processed in strict `(time, seq)` order on an integer
//! microsecond clock. Network messages are delivered after the configured
//! delay; timers (task completion, rotation rounds) fire at their absolute
//! time. A run ends when the event queue drains, after which the quiescence
//! invariants are checked.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{eagle_partitions, EagleCentral, ProbeWorker};
use crate::config::{Algorithm, JobRouting, SimConfig};
use crate::error::SimError;
use crate::ids::{Entity, WorkerId};
use crate::message::{Ctx, Delivery, MessageKind, Outgoing, Payload};
use crate::metrics::JobRecord;
use crate::rng::{scheduler_rng, worker_rng};
use crate::scheduler::{Aggregate, Scheduler};
use crate::time::Micros;
use crate::worker::{PeacockWorker, Via};
use crate::workload::Job;

#[derive(Debug)]
pub struct Event {
    pub time: Micros,
    pub seq: u64,
    pub target: Entity,
    pub payload: Payload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Network messages sent during a run, by type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub probe_submit: u64,
    pub rotation_batch: u64,
    pub task_request: u64,
    pub task_assign: u64,
    pub task_cancel: u64,
    pub task_finish_notify: u64,
    pub peer_update: u64,
}

impl MessageCounts {
    fn record(&mut self, kind: MessageKind) {
        match kind {
            MessageKind::ProbeSubmit => self.probe_submit += 1,
            MessageKind::RotationBatch => self.rotation_batch += 1,
            MessageKind::TaskRequest => self.task_request += 1,
            MessageKind::TaskAssign => self.task_assign += 1,
            MessageKind::TaskCancel => self.task_cancel += 1,
            MessageKind::TaskFinishNotify => self.task_finish_notify += 1,
            MessageKind::PeerUpdate => self.peer_update += 1,
            MessageKind::JobArrival | MessageKind::RotationTick | MessageKind::TaskComplete => {}
        }
    }

    pub fn total(&self) -> u64 {
        self.probe_submit
            + self.rotation_batch
            + self.task_request
            + self.task_assign
            + self.task_cancel
            + self.task_finish_notify
            + self.peer_update
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub events: u64,
    pub messages: MessageCounts,
    pub tasks: u64,
    pub probes: u64,
    pub launches: u64,
    pub cancels: u64,
    /// Probe hops over the ring, summed over all launched probes.
    pub rotations: u64,
    /// Summed busy time of all workers.
    pub busy_time: Micros,
    pub first_arrival: Micros,
    pub last_completion: Micros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub workers: u32,
    pub schedulers: u32,
    pub seed: u64,
    /// Sorted by job id.
    pub records: Vec<JobRecord>,
    pub counters: Counters,
}

enum Workers {
    Peacock(Vec<PeacockWorker>),
    Baseline(Vec<ProbeWorker>),
}

impl Workers {
    fn len(&self) -> usize {
        match self {
            Workers::Peacock(w) => w.len(),
            Workers::Baseline(w) => w.len(),
        }
    }
}

pub struct Engine {
    cfg: SimConfig,
    now: Micros,
    seq: u64,
    heap: BinaryHeap<Event>,
    workers: Workers,
    schedulers: Vec<Scheduler>,
    central: Option<EagleCentral>,
    jobs: Vec<Option<Job>>,
    records: Vec<JobRecord>,
    counters: Counters,
    out: Vec<Outgoing>,
    touched: Vec<WorkerId>,
}

impl Engine {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let workers = match cfg.algorithm {
            Algorithm::Peacock => Workers::Peacock(
                (0..cfg.workers)
                    .map(|id| {
                        let phase = if cfg.tick_jitter {
                            Micros(worker_rng(cfg.seed ^ 0x7a5e, id).random_range(0..cfg.rotation_interval.0))
                        } else {
                            Micros::ZERO
                        };
                        PeacockWorker::new(id, cfg.workers, cfg.rotation_interval, phase, cfg.peacock.bypass_rule)
                    })
                    .collect(),
            ),
            _ => Workers::Baseline((0..cfg.workers).map(|id| ProbeWorker::new(id, &cfg)).collect()),
        };
        let central = matches!(cfg.algorithm, Algorithm::Eagle)
            .then(|| EagleCentral::new(eagle_partitions(cfg.workers, cfg.eagle.short_partition_fraction).0));
        let schedulers = (0..cfg.schedulers).map(|id| Scheduler::new(id, &cfg)).collect();
        Ok(Engine {
            cfg,
            now: Micros::ZERO,
            seq: 0,
            heap: BinaryHeap::new(),
            workers,
            schedulers,
            central,
            jobs: Vec::new(),
            records: Vec::new(),
            counters: Counters::default(),
            out: Vec::new(),
            touched: Vec::new(),
        })
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    fn exists(&self, e: Entity) -> bool {
        match e {
            Entity::Worker(w) => (w as usize) < self.workers.len(),
            Entity::Scheduler(s) => (s as usize) < self.schedulers.len(),
        }
    }

    /// Schedules `payload` for `to`: network messages after the configured
    /// delay, timers at their absolute time.
    pub fn send(&mut self, to: Entity, payload: Payload, delivery: Delivery) -> Result<Micros, SimError> {
        if !self.exists(to) {
            return Err(SimError::Config(format!("message to unknown entity {to:?}")));
        }
        let time = match delivery {
            Delivery::Network => {
                self.counters.messages.record(payload.kind());
                self.now + self.cfg.network_delay
            }
            Delivery::At(t) => t.max(self.now),
        };
        self.seq += 1;
        self.heap.push(Event { time, seq: self.seq, target: to, payload });
        Ok(time)
    }

    /// Queues job arrivals, routed to schedulers.
    pub fn load(&mut self, mut jobs: Vec<Job>) -> Result<(), SimError> {
        jobs.sort_by_key(|j| (j.arrival, j.id));
        let mut routing = scheduler_rng(self.cfg.seed, u32::MAX);
        self.counters.first_arrival = jobs.first().map(|j| j.arrival).unwrap_or_default();
        for (i, job) in jobs.iter().enumerate() {
            let s = match self.cfg.routing {
                JobRouting::RoundRobin => (i % self.schedulers.len()) as u32,
                JobRouting::Random => routing.random_range(0..self.schedulers.len() as u32),
            };
            self.counters.tasks += job.task_count() as u64;
            let idx = self.jobs.len() + i;
            self.seq += 1;
            self.heap.push(Event {
                time: job.arrival,
                seq: self.seq,
                target: Entity::Scheduler(s),
                payload: Payload::JobArrival(idx),
            });
        }
        self.jobs.extend(jobs.into_iter().map(Some));
        Ok(())
    }

    /// Processes events until none remain.
    pub fn run_to_quiescence(&mut self) -> Result<(), SimError> {
        while let Some(ev) = self.heap.pop() {
            if ev.time < self.now {
                return Err(SimError::Invariant(format!("event at {} processed after clock {}", ev.time, self.now)));
            }
            if ev.time > self.now {
                self.audit_touched()?;
            }
            self.now = ev.time;
            self.counters.events += 1;
            if self.counters.events > self.cfg.max_events {
                return Err(SimError::NonTermination {
                    events: self.counters.events,
                    now: self.now,
                    pending: self.heap.len(),
                });
            }
            self.dispatch(ev)?;
        }
        self.audit_touched()
    }

    fn audit_touched(&mut self) -> Result<(), SimError> {
        if !self.cfg.audit {
            self.touched.clear();
            return Ok(());
        }
        for &w in &self.touched {
            match &self.workers {
                Workers::Peacock(ws) => ws[w as usize].check_idle_invariant().map_err(SimError::Invariant)?,
                Workers::Baseline(ws) => ws[w as usize].check_idle_invariant().map_err(SimError::Invariant)?,
            }
        }
        self.touched.clear();
        Ok(())
    }

    fn dispatch(&mut self, ev: Event) -> Result<(), SimError> {
        let mut out = std::mem::take(&mut self.out);
        let mut ctx = Ctx { now: self.now, out: &mut out };
        let unexpected = |target: Entity, p: &Payload| {
            SimError::protocol(ev.time, format!("{target:?} cannot handle {:?}", p.kind()))
        };
        match (ev.target, ev.payload) {
            (Entity::Scheduler(s), Payload::JobArrival(i)) => {
                let job = self.jobs[i].take().ok_or_else(|| SimError::protocol(ev.time, "job delivered twice"))?;
                self.schedulers[s as usize].on_job_arrival(&mut ctx, job, self.central.as_mut())?;
            }
            (Entity::Scheduler(s), Payload::TaskRequest { probe, worker, rotations }) => {
                self.schedulers[s as usize].on_task_request(&mut ctx, probe, worker, rotations)?;
            }
            (Entity::Scheduler(s), Payload::TaskFinishNotify { task, worker, finished_at }) => {
                let rec = self.schedulers[s as usize].on_task_finish(
                    &mut ctx,
                    task,
                    worker,
                    finished_at,
                    self.central.as_mut(),
                )?;
                if let Some(rec) = rec {
                    self.counters.last_completion = self.counters.last_completion.max(rec.completion);
                    self.records.push(rec);
                }
            }
            (Entity::Scheduler(s), Payload::PeerUpdate(u)) => self.schedulers[s as usize].on_peer_update(&u),
            (Entity::Worker(w), payload) => {
                self.touched.push(w);
                match (&mut self.workers, payload) {
                    (Workers::Peacock(ws), Payload::ProbeSubmit { probe, state }) => {
                        ws[w as usize].on_probe_arrival(&mut ctx, probe, Via::Scheduler, state.as_ref())?;
                    }
                    (Workers::Peacock(ws), Payload::RotationBatch(msg)) => {
                        ws[w as usize].on_rotation_batch(&mut ctx, &msg)?;
                    }
                    (Workers::Peacock(ws), Payload::RotationTick) => {
                        ws[w as usize].on_rotation_tick(&mut ctx);
                    }
                    (Workers::Peacock(ws), Payload::TaskAssign { task, duration, state }) => {
                        ws[w as usize].on_task_assign(&mut ctx, task, duration, state.as_ref())?;
                    }
                    (Workers::Peacock(ws), Payload::TaskComplete) => {
                        ws[w as usize].on_task_complete(&mut ctx)?;
                    }
                    (Workers::Baseline(ws), Payload::ProbeSubmit { probe, .. }) => {
                        ws[w as usize].on_probe(&mut ctx, probe)
                    }
                    (Workers::Baseline(ws), Payload::TaskAssign { task, duration, .. }) => {
                        ws[w as usize].on_task_assign(&mut ctx, task, duration)?;
                    }
                    (Workers::Baseline(ws), Payload::TaskCancel { probe }) => {
                        ws[w as usize].on_task_cancel(&mut ctx, probe)?;
                    }
                    (Workers::Baseline(ws), Payload::TaskComplete) => ws[w as usize].on_task_complete(&mut ctx)?,
                    (_, p) => return Err(unexpected(ev.target, &p)),
                }
            }
            (target, p) => return Err(unexpected(target, &p)),
        }
        for o in out.drain(..) {
            self.send(o.to, o.payload, o.delivery)?;
        }
        self.out = out;
        Ok(())
    }

    /// Checks the end-of-run invariants and assembles the result.
    pub fn finish(mut self) -> Result<RunResult, SimError> {
        if !self.heap.is_empty() {
            return Err(SimError::Invariant(format!("{} events still pending", self.heap.len())));
        }
        let expected_jobs = self.jobs.len();
        if self.records.len() != expected_jobs {
            return Err(SimError::Invariant(format!("{} of {expected_jobs} jobs completed", self.records.len())));
        }
        for s in &self.schedulers {
            let st = s.stats();
            self.counters.probes += st.probes;
            self.counters.launches += st.launches;
            self.counters.cancels += st.cancels;
            self.counters.rotations += st.rotations;
            if s.open_jobs() != 0 {
                return Err(SimError::Invariant(format!("scheduler {} has open jobs", s.id())));
            }
            if matches!(self.cfg.algorithm, Algorithm::Peacock) && s.aggregate() != Aggregate::default() {
                return Err(SimError::Invariant(format!(
                    "scheduler {} aggregate is {:?} at quiescence",
                    s.id(),
                    s.aggregate()
                )));
            }
        }
        let c = &self.counters;
        if c.launches != c.tasks {
            return Err(SimError::Invariant(format!("{} launches for {} tasks", c.launches, c.tasks)));
        }
        if c.launches + c.cancels != c.probes {
            return Err(SimError::Invariant(format!(
                "{} launches + {} cancels != {} probes",
                c.launches, c.cancels, c.probes
            )));
        }
        self.counters.busy_time = match &self.workers {
            Workers::Peacock(ws) => {
                for w in ws {
                    if !w.is_idle() || w.held() != 0 {
                        return Err(SimError::Invariant(format!("worker {} not drained at quiescence", w.id())));
                    }
                }
                ws.iter().map(|w| w.busy_time()).sum()
            }
            Workers::Baseline(ws) => {
                for w in ws {
                    if !w.is_idle() || w.queue_len() != 0 {
                        return Err(SimError::Invariant(format!("worker {} not drained at quiescence", w.id())));
                    }
                }
                ws.iter().map(|w| w.busy_time()).sum()
            }
        };
        self.records.sort_by_key(|r| r.job_id);
        Ok(RunResult {
            algorithm: self.cfg.algorithm,
            workers: self.cfg.workers,
            schedulers: self.cfg.schedulers,
            seed: self.cfg.seed,
            records: self.records,
            counters: self.counters,
        })
    }

    pub fn schedulers(&self) -> &[Scheduler] {
        &self.schedulers
    }

    pub fn peacock_workers(&self) -> Option<&[PeacockWorker]> {
        match &self.workers {
            Workers::Peacock(ws) => Some(ws),
            Workers::Baseline(_) => None,
        }
    }
}

/// Simulates `jobs` under `cfg` until quiescence.
pub fn run(cfg: &SimConfig, jobs: Vec<Job>) -> Result<RunResult, SimError> {
    let mut engine = Engine::new(cfg.clone())?;
    engine.load(jobs)?;
    engine.run_to_quiescence()?;
    engine.finish()
}
