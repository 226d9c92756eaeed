//! Comparison schedulers: Sparrow-style batch sampling with late binding,
//! and an Eagle-style hybrid with a centrally placed long partition,
//! re-sampling of short probes away from long work, and SRPT queues.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Range;

use rand::Rng;

use crate::config::{Algorithm, SimConfig};
use crate::elastic_queue::Probe;
use crate::error::SimError;
use crate::ids::{Entity, JobId, ProbeKey, SchedulerId, TaskRef, WorkerId};
use crate::message::{Ctx, Payload};
use crate::rng::{worker_rng, SimRng};
use crate::time::Micros;

fn probes_for(
    targets: &[WorkerId],
    owner: SchedulerId,
    job: JobId,
    stage: u32,
    now: Micros,
    estimate: Micros,
) -> Result<Vec<(WorkerId, Probe)>, SimError> {
    targets
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let key = ProbeKey { job, stage, index: i as u32 };
            Ok((w, Probe::new(key, owner, now, estimate, Micros::ZERO)?))
        })
        .collect()
}

/// Sparrow batch sampling: one late-bound probe per sampled worker. The
/// caller samples `ratio × tasks` targets.
pub fn sparrow_probes(
    targets: &[WorkerId],
    owner: SchedulerId,
    job: JobId,
    stage: u32,
    now: Micros,
    estimate: Micros,
) -> Result<Vec<(WorkerId, Probe)>, SimError> {
    probes_for(targets, owner, job, stage, now, estimate)
}

/// Eagle placement. Long stages arrive with one centrally chosen worker per
/// task; short stages with `ratio × tasks` sampled workers.
pub fn eagle_probes(
    targets: &[WorkerId],
    long: bool,
    owner: SchedulerId,
    job: JobId,
    stage: u32,
    now: Micros,
    estimate: Micros,
) -> Result<Vec<(WorkerId, Probe)>, SimError> {
    let mut probes = probes_for(targets, owner, job, stage, now, estimate)?;
    for (_, p) in &mut probes {
        p.long = long;
    }
    Ok(probes)
}

/// Static split of the worker ids: `[0, k)` general, `[k, W)` short-only.
pub fn eagle_partitions(workers: u32, short_fraction: f64) -> (Range<u32>, Range<u32>) {
    if workers < 2 {
        return (0..workers, 0..0);
    }
    let short = ((workers as f64 * short_fraction).round() as u32).clamp(1, workers - 1);
    let k = workers - short;
    (0..k, k..workers)
}

/// Eagle's centralized long-job scheduler. It knows its own placements
/// immediately and learns about finishes through the owning scheduler.
#[derive(Debug)]
pub struct EagleCentral {
    load: Vec<Micros>,
    by_load: BTreeSet<(Micros, WorkerId)>,
}

impl EagleCentral {
    pub fn new(general: Range<u32>) -> Self {
        let load = vec![Micros::ZERO; general.end as usize];
        let by_load = general.map(|w| (Micros::ZERO, w)).collect();
        EagleCentral { load, by_load }
    }

    /// One task per least-loaded general worker, updating loads as it goes.
    pub fn place(&mut self, tasks: usize, estimate: Micros) -> Vec<WorkerId> {
        (0..tasks)
            .map(|_| {
                let (l, w) = self.by_load.pop_first().expect("general partition is non-empty");
                self.load[w as usize] = l + estimate;
                self.by_load.insert((l + estimate, w));
                w
            })
            .collect()
    }

    pub fn release(&mut self, worker: WorkerId, estimate: Micros) {
        let Some(l) = self.load.get(worker as usize).copied() else { return };
        if self.by_load.remove(&(l, worker)) {
            let l = l.saturating_sub(estimate);
            self.load[worker as usize] = l;
            self.by_load.insert((l, worker));
        }
    }

    pub fn load_of(&self, worker: WorkerId) -> Micros {
        self.load.get(worker as usize).copied().unwrap_or_default()
    }
}

/// Shortest-estimate-first queue with a starvation bound: once the oldest
/// probe has waited `bound`, it is served next regardless of length.
#[derive(Debug, Default)]
pub struct SrptQueue {
    items: Vec<(Probe, Micros, u64)>,
    bound: Micros,
    seq: u64,
}

impl SrptQueue {
    pub fn new(bound: Micros) -> Self {
        SrptQueue { items: Vec::new(), bound, seq: 0 }
    }

    pub fn push(&mut self, probe: Probe, now: Micros) {
        self.seq += 1;
        self.items.push((probe, now, self.seq));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn pop(&mut self, now: Micros) -> Option<Probe> {
        let oldest = self.items.iter().enumerate().min_by_key(|(_, (_, _, s))| *s)?.0;
        let pick = if now.saturating_sub(self.items[oldest].1) >= self.bound {
            oldest
        } else {
            self.items
                .iter()
                .enumerate()
                .min_by_key(|(_, (p, _, s))| (p.runtime_estimate, p.job_arrival, p.key, *s))
                .map(|(i, _)| i)?
        };
        Some(self.items.swap_remove(pick).0)
    }
}

#[derive(Debug)]
enum BaselineQueue {
    Fifo(VecDeque<Probe>),
    Srpt(SrptQueue),
}

#[derive(Debug)]
enum Slot {
    Idle,
    Reserved(Probe),
    Running { task: TaskRef, owner: SchedulerId, long: bool, duration: Micros },
}

/// Late-binding worker used by both baselines.
#[derive(Debug)]
pub struct ProbeWorker {
    id: WorkerId,
    slot: Slot,
    queue: BaselineQueue,
    /// Long probes held here (queued, reserved or running).
    long_held: u32,
    /// Eagle: the short partition, when this worker belongs to the general one.
    resample_into: Option<Range<u32>>,
    rng: SimRng,
    busy: Micros,
}

impl ProbeWorker {
    pub fn new(id: WorkerId, cfg: &SimConfig) -> Self {
        let (queue, resample_into) = match cfg.algorithm {
            Algorithm::Eagle => {
                let (general, short) = eagle_partitions(cfg.workers, cfg.eagle.short_partition_fraction);
                let into = (general.contains(&id) && !short.is_empty()).then_some(short);
                (BaselineQueue::Srpt(SrptQueue::new(cfg.eagle.srpt_starvation_bound)), into)
            }
            _ => (BaselineQueue::Fifo(VecDeque::new()), None),
        };
        ProbeWorker {
            id,
            slot: Slot::Idle,
            queue,
            long_held: 0,
            resample_into,
            rng: worker_rng(cfg.seed, id),
            busy: Micros::ZERO,
        }
    }

    pub fn id(&self) -> WorkerId {
        self.id
    }

    pub fn queue_len(&self) -> usize {
        match &self.queue {
            BaselineQueue::Fifo(q) => q.len(),
            BaselineQueue::Srpt(q) => q.len(),
        }
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.slot, Slot::Idle)
    }

    pub fn busy_time(&self) -> Micros {
        self.busy
    }

    pub fn holds_long(&self) -> bool {
        self.long_held > 0
    }

    /// Long task currently executing here, if any.
    pub fn running_long(&self) -> bool {
        matches!(self.slot, Slot::Running { long: true, .. })
    }

    pub fn check_idle_invariant(&self) -> Result<(), String> {
        if self.is_idle() && self.queue_len() > 0 {
            return Err(format!("worker {} is idle with {} waiting probes", self.id, self.queue_len()));
        }
        Ok(())
    }

    pub fn on_probe(&mut self, ctx: &mut Ctx<'_>, mut probe: Probe) {
        if !probe.long && !probe.resampled && self.long_held > 0 {
            if let Some(short) = &self.resample_into {
                probe.resampled = true;
                let target = self.rng.random_range(short.clone());
                ctx.send(Entity::Worker(target), Payload::ProbeSubmit { probe, state: None });
                return;
            }
        }
        probe.probe_arrival = ctx.now;
        if probe.long {
            self.long_held += 1;
        }
        if matches!(self.slot, Slot::Idle) {
            self.reserve(ctx, probe);
        } else {
            match &mut self.queue {
                BaselineQueue::Fifo(q) => q.push_back(probe),
                BaselineQueue::Srpt(q) => q.push(probe, ctx.now),
            }
        }
    }

    fn reserve(&mut self, ctx: &mut Ctx<'_>, probe: Probe) {
        ctx.send(
            Entity::Scheduler(probe.owner),
            Payload::TaskRequest { probe: probe.key, worker: self.id, rotations: 0 },
        );
        self.slot = Slot::Reserved(probe);
    }

    fn next(&mut self, ctx: &mut Ctx<'_>) {
        let next = match &mut self.queue {
            BaselineQueue::Fifo(q) => q.pop_front(),
            BaselineQueue::Srpt(q) => q.pop(ctx.now),
        };
        match next {
            Some(p) => self.reserve(ctx, p),
            None => self.slot = Slot::Idle,
        }
    }

    pub fn on_task_assign(&mut self, ctx: &mut Ctx<'_>, task: TaskRef, duration: Micros) -> Result<(), SimError> {
        let Slot::Reserved(p) = &self.slot else {
            return Err(SimError::protocol(ctx.now, format!("worker {} got {task:?} without a reservation", self.id)));
        };
        if p.key.job != task.job || p.key.stage != task.stage {
            return Err(SimError::protocol(ctx.now, format!("worker {} got {task:?} for probe {:?}", self.id, p.key)));
        }
        self.slot = Slot::Running { task, owner: p.owner, long: p.long, duration };
        ctx.timer(Entity::Worker(self.id), ctx.now + duration, Payload::TaskComplete);
        Ok(())
    }

    pub fn on_task_cancel(&mut self, ctx: &mut Ctx<'_>, probe: ProbeKey) -> Result<(), SimError> {
        match &self.slot {
            Slot::Reserved(p) if p.key == probe => {
                if p.long {
                    self.long_held -= 1;
                }
                self.next(ctx);
                Ok(())
            }
            _ => Err(SimError::protocol(ctx.now, format!("worker {} got cancel for unreserved {probe:?}", self.id))),
        }
    }

    pub fn on_task_complete(&mut self, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let Slot::Running { task, owner, long, duration } = self.slot else {
            return Err(SimError::protocol(ctx.now, format!("worker {} completed with nothing running", self.id)));
        };
        self.busy += duration;
        if long {
            self.long_held -= 1;
        }
        ctx.send(Entity::Scheduler(owner), Payload::TaskFinishNotify { task, worker: self.id, finished_at: ctx.now });
        self.next(ctx);
        Ok(())
    }
}
