//! Peacock worker: one execution slot, an elastic waiting queue and a ring
//! successor that receives rotated probes once per round.

use std::collections::HashSet;

use crate::elastic_queue::{BypassRule, EnqueueOutcome, Probe, SharedState, Version, WaitingQueue};
use crate::error::SimError;
use crate::ids::{Entity, ProbeKey, SchedulerId, TaskRef, WorkerId};
use crate::message::{Ctx, Payload, RotationMessage};
use crate::time::Micros;

/// How a probe reached the worker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Via {
    Scheduler,
    Rotation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Idle,
    /// Task requested, data not yet received.
    Reserved(Probe),
    Running {
        probe: Probe,
        task: TaskRef,
        started: Micros,
        finish: Micros,
    },
}

#[derive(Debug)]
pub struct PeacockWorker {
    id: WorkerId,
    successor: WorkerId,
    slot: Slot,
    queue: WaitingQueue,
    known_state: SharedState,
    last_sent: Version,
    rotation_interval: Micros,
    phase: Micros,
    tick_armed: bool,
    /// Every probe currently at this worker (slot, queue or rotation buffer).
    held: HashSet<ProbeKey>,
    busy: Micros,
    messages_sent: u64,
}

impl PeacockWorker {
    pub fn new(id: WorkerId, workers: u32, rotation_interval: Micros, phase: Micros, rule: BypassRule) -> Self {
        assert!(workers >= 1 && id < workers);
        PeacockWorker {
            id,
            successor: (id + 1) % workers,
            slot: Slot::Idle,
            queue: WaitingQueue::with_rule(rule),
            known_state: SharedState::default(),
            last_sent: Version::default(),
            rotation_interval,
            phase,
            tick_armed: false,
            held: HashSet::new(),
            busy: Micros::ZERO,
            messages_sent: 0,
        }
    }

    pub fn id(&self) -> WorkerId {
        self.id
    }

    pub fn successor(&self) -> WorkerId {
        self.successor
    }

    pub fn slot(&self) -> &Slot {
        &self.slot
    }

    pub fn queue(&self) -> &WaitingQueue {
        &self.queue
    }

    pub fn known_state(&self) -> &SharedState {
        &self.known_state
    }

    pub fn last_sent_version(&self) -> Version {
        self.last_sent
    }

    pub fn busy_time(&self) -> Micros {
        self.busy
    }

    pub fn rotation_messages_sent(&self) -> u64 {
        self.messages_sent
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.slot, Slot::Idle)
    }

    /// Number of probes held in any form.
    pub fn held(&self) -> usize {
        self.held.len()
    }

    /// Remaining runtime of the occupying task; zero when idle or reserved.
    fn remaining(&self, now: Micros) -> Micros {
        match &self.slot {
            Slot::Running { finish, .. } => finish.saturating_sub(now),
            _ => Micros::ZERO,
        }
    }

    /// Adopts `state` if it is newer, then trims the queue to the new quotas.
    /// Returns the probes evicted by the trim.
    pub fn adopt_shared_state(&mut self, state: &SharedState) -> Vec<Probe> {
        if !state.is_newer_than(&self.known_state) {
            return Vec::new();
        }
        self.known_state = *state;
        self.queue.trim_to_quota(&self.known_state)
    }

    pub fn on_probe_arrival(
        &mut self,
        ctx: &mut Ctx<'_>,
        mut probe: Probe,
        via: Via,
        state: Option<&SharedState>,
    ) -> Result<Option<EnqueueOutcome>, SimError> {
        if let Some(s) = state {
            self.adopt_shared_state(s);
        }
        let outcome = self.accept(ctx, &mut probe, via)?;
        self.arm_tick(ctx);
        Ok(outcome)
    }

    fn accept(&mut self, ctx: &mut Ctx<'_>, probe: &mut Probe, via: Via) -> Result<Option<EnqueueOutcome>, SimError> {
        if !self.held.insert(probe.key) {
            return Err(SimError::protocol(
                ctx.now,
                format!("worker {} received duplicate probe {:?} via {via:?}", self.id, probe.key),
            ));
        }
        probe.probe_arrival = ctx.now;
        if self.is_idle() && self.queue.is_empty() {
            self.reserve(ctx, probe.clone());
            return Ok(None);
        }
        let remaining = self.remaining(ctx.now);
        let outcome = self.queue.enqueue_probe(probe.clone(), ctx.now, remaining, &self.known_state)?;
        Ok(Some(outcome))
    }

    fn reserve(&mut self, ctx: &mut Ctx<'_>, probe: Probe) {
        ctx.send(
            Entity::Scheduler(probe.owner),
            Payload::TaskRequest { probe: probe.key, worker: self.id, rotations: probe.rotations },
        );
        self.slot = Slot::Reserved(probe);
    }

    /// Delivers a rotation batch from the predecessor.
    pub fn on_rotation_batch(&mut self, ctx: &mut Ctx<'_>, msg: &RotationMessage) -> Result<(), SimError> {
        self.adopt_shared_state(&msg.state);
        for mut probe in msg.unpack(ctx.now) {
            self.accept(ctx, &mut probe, Via::Rotation)?;
        }
        self.arm_tick(ctx);
        Ok(())
    }

    fn has_pending_rotation(&self) -> bool {
        !self.queue.rotating().is_empty() || self.known_state.version > self.last_sent
    }

    /// Schedules the next rotation round if something is waiting for it.
    fn arm_tick(&mut self, ctx: &mut Ctx<'_>) {
        if self.tick_armed || !self.has_pending_rotation() {
            return;
        }
        self.tick_armed = true;
        ctx.timer(Entity::Worker(self.id), self.next_tick(ctx.now), Payload::RotationTick);
    }

    /// First round boundary strictly after `now`.
    pub fn next_tick(&self, now: Micros) -> Micros {
        let r = self.rotation_interval.0;
        let p = self.phase.0 % r;
        if now.0 < p {
            return Micros(p);
        }
        Micros(((now.0 - p) / r + 1) * r + p)
    }

    /// Sends every marked probe, plus the current shared state, to the
    /// successor, but only when there is something new to say.
    pub fn on_rotation_tick(&mut self, ctx: &mut Ctx<'_>) -> Option<RotationMessage> {
        self.tick_armed = false;
        if !self.has_pending_rotation() {
            return None;
        }
        let mut probes = self.queue.take_rotating();
        for p in &mut probes {
            p.rotations += 1;
            self.held.remove(&p.key);
        }
        let msg = RotationMessage::pack(self.id, probes, self.known_state);
        self.last_sent = self.known_state.version;
        self.messages_sent += 1;
        ctx.send(Entity::Worker(self.successor), Payload::RotationBatch(msg.clone()));
        Some(msg)
    }

    pub fn on_task_assign(
        &mut self,
        ctx: &mut Ctx<'_>,
        task: TaskRef,
        duration: Micros,
        state: Option<&SharedState>,
    ) -> Result<(), SimError> {
        let probe = match &self.slot {
            Slot::Reserved(p) if p.key.job == task.job && p.key.stage == task.stage && p.key.index == task.task => {
                p.clone()
            }
            other => {
                return Err(SimError::protocol(
                    ctx.now,
                    format!("worker {} assigned {task:?} while {other:?}", self.id),
                ))
            }
        };
        let finish = ctx.now + duration;
        self.slot = Slot::Running { probe, task, started: ctx.now, finish };
        ctx.timer(Entity::Worker(self.id), finish, Payload::TaskComplete);
        if let Some(s) = state {
            self.adopt_shared_state(s);
        }
        self.arm_tick(ctx);
        Ok(())
    }

    pub fn on_task_complete(&mut self, ctx: &mut Ctx<'_>) -> Result<(TaskRef, SchedulerId), SimError> {
        let Slot::Running { probe, task, started, .. } = std::mem::replace(&mut self.slot, Slot::Idle) else {
            return Err(SimError::protocol(ctx.now, format!("worker {} completed with nothing running", self.id)));
        };
        self.busy += ctx.now - started;
        self.held.remove(&probe.key);
        ctx.send(
            Entity::Scheduler(probe.owner),
            Payload::TaskFinishNotify { task, worker: self.id, finished_at: ctx.now },
        );
        if let Some(next) = self.queue.pop_head() {
            self.reserve(ctx, next);
        }
        Ok((task, probe.owner))
    }

    /// Audit: an idle worker never keeps waiting probes.
    pub fn check_idle_invariant(&self) -> Result<(), String> {
        if self.is_idle() && !self.queue.is_empty() {
            return Err(format!("worker {} is idle with {} waiting probes", self.id, self.queue.len()));
        }
        if self.queue.load() != self.queue.recomputed_load() {
            return Err(format!("worker {} load bookkeeping drifted", self.id));
        }
        Ok(())
    }
}
