//! Worker-side elastic probe queue.
//!
//! A [`WaitingQueue`] keeps probes ordered so that short probes may move
//! ahead of long ones, but never past a probe whose deadline has passed or
//! would be pushed past its deadline by the move. Admission is bounded by
//! the cluster-wide [`SharedState`]: once the queue holds at least `φ`
//! probes or at least `ω` of estimated work, tail probes are evicted and
//! marked for rotation to the ring successor.
//!
//! The structure is pure and single-threaded; it never looks at a clock and
//! all time flows in through the `now` arguments.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::ids::{ProbeKey, SchedulerId};
use crate::time::Micros;

/// Placeholder for one task, carried to and between workers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub key: ProbeKey,
    /// Scheduler that owns the job and answers task requests.
    pub owner: SchedulerId,
    /// λ: submission time of the job (stage) this probe belongs to.
    pub job_arrival: Micros,
    /// θ: estimated runtime of the task.
    pub runtime_estimate: Micros,
    /// μ: waiting allowance frozen at admission.
    pub threshold: Micros,
    /// β: time the probe reached its current worker. Bookkeeping only.
    pub probe_arrival: Micros,
    pub rotations: u32,
    /// Eagle: probe belongs to a long stage.
    pub long: bool,
    /// Eagle: probe was already re-sampled once.
    pub resampled: bool,
}

impl Probe {
    pub fn new(
        key: ProbeKey,
        owner: SchedulerId,
        job_arrival: Micros,
        runtime_estimate: Micros,
        threshold: Micros,
    ) -> Result<Self, SimError> {
        if runtime_estimate.is_zero() {
            return Err(SimError::InvalidProbe(key));
        }
        Ok(Probe {
            key,
            owner,
            job_arrival,
            runtime_estimate,
            threshold,
            probe_arrival: job_arrival,
            rotations: 0,
            long: false,
            resampled: false,
        })
    }

    /// λ + μ, the soft latest start time.
    pub fn deadline(&self) -> Micros {
        self.job_arrival + self.threshold
    }

    pub fn is_expired(&self, now: Micros) -> bool {
        now >= self.deadline()
    }
}

/// Freshness stamp of a [`SharedState`]; ordered lexicographically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Version {
    pub time: Micros,
    pub scheduler: SchedulerId,
    /// Per-scheduler counter separating states derived at the same instant.
    pub counter: u64,
}

/// The pair (probe quota φ, load quota ω) plus its version.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedState {
    pub probe_quota: u64,
    pub load_quota: Micros,
    pub version: Version,
}

impl SharedState {
    pub fn is_newer_than(&self, other: &SharedState) -> bool {
        self.version > other.version
    }
}

/// Which reading of the bypass test to apply when the arriving probe was
/// submitted no earlier than the probe it is compared with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BypassRule {
    /// Bypass only while the passed probe is not yet expired and would still
    /// start by its deadline. Expired probes are never bypassed.
    #[default]
    Guarded,
    /// The inequality exactly as printed: `λq + μq + θp ≤ τ`.
    Literal,
}

/// Where an enqueued probe ended up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    /// Inserted at this index (0 = head).
    Inserted(usize),
    /// Marked for the next rotation round.
    Rotated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnqueueOutcome {
    pub placement: Placement,
    /// Probes trimmed from the tail, in removal order. They are already in
    /// the rotating buffer.
    pub evicted: Vec<Probe>,
}

/// Ordered waiting probes with cached total load and a rotation buffer.
#[derive(Clone, Debug, Default)]
pub struct WaitingQueue {
    entries: VecDeque<Probe>,
    load: Micros,
    rotating: Vec<Probe>,
    rule: BypassRule,
}

impl WaitingQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rule(rule: BypassRule) -> Self {
        WaitingQueue { rule, ..Self::default() }
    }

    /// Queue holding `probes` in the given order, head first.
    pub fn from_probes(rule: BypassRule, probes: impl IntoIterator<Item = Probe>) -> Self {
        let mut q = WaitingQueue::with_rule(rule);
        for p in probes {
            let at = q.entries.len();
            q.insert_at(at, p);
        }
        q
    }

    pub fn rule(&self) -> BypassRule {
        self.rule
    }

    /// Number of waiting probes (the rotating buffer is not counted).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// α: summed runtime estimate of the waiting probes.
    pub fn load(&self) -> Micros {
        self.load
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &Probe> + '_ {
        self.entries.iter()
    }

    pub fn rotating(&self) -> &[Probe] {
        &self.rotating
    }

    /// Distance from the head of the waiting probe with `key`, if present.
    pub fn position_of(&self, key: &ProbeKey) -> Option<usize> {
        self.entries.iter().position(|p| p.key == *key)
    }

    /// Inserts `probe`, or marks it for rotation, then trims to quota.
    ///
    /// `remaining` is the leftover runtime of the task currently occupying
    /// the worker (zero while the slot is only reserved).
    pub fn enqueue_probe(
        &mut self,
        probe: Probe,
        now: Micros,
        remaining: Micros,
        state: &SharedState,
    ) -> Result<EnqueueOutcome, SimError> {
        if probe.runtime_estimate.is_zero() {
            return Err(SimError::InvalidProbe(probe.key));
        }
        let mut wait = remaining + self.load;
        let mut stop = None;
        for i in (0..self.entries.len()).rev() {
            let q = &self.entries[i];
            let bypass = if probe.job_arrival >= q.job_arrival {
                self.may_bypass_earlier(&probe, q, now, wait)
            } else {
                // p was submitted first: it stays behind a shorter q as long
                // as it can still start by its own deadline.
                let hold = q.runtime_estimate <= probe.runtime_estimate && now + wait <= probe.deadline();
                let expired_guard = self.rule == BypassRule::Guarded && q.is_expired(now);
                !(hold || expired_guard)
            };
            if bypass {
                wait -= q.runtime_estimate;
            } else {
                stop = Some(i + 1);
                break;
            }
        }
        let placement = match stop {
            Some(position) => self.place_or_rotate(probe, position, now, wait),
            None => {
                self.insert_at(0, probe);
                Placement::Inserted(0)
            }
        };
        let evicted = self.trim_to_quota(state);
        Ok(EnqueueOutcome { placement, evicted })
    }

    /// Bypass test against a probe `q` submitted no later than `p`. `wait` is
    /// the estimated start of the slot right after `q`.
    fn may_bypass_earlier(&self, p: &Probe, q: &Probe, now: Micros, wait: Micros) -> bool {
        if p.runtime_estimate > q.runtime_estimate {
            return false;
        }
        match self.rule {
            BypassRule::Guarded => {
                let q_start = wait - q.runtime_estimate + p.runtime_estimate;
                !q.is_expired(now) && now + q_start <= q.deadline()
            }
            BypassRule::Literal => q.deadline() + p.runtime_estimate <= now,
        }
    }

    /// Inserts `probe` at `position` if it can wait that long, or if it is
    /// already past its deadline; otherwise marks it for rotation.
    pub fn place_or_rotate(&mut self, probe: Probe, position: usize, now: Micros, wait: Micros) -> Placement {
        let deadline = probe.deadline();
        if now + wait <= deadline || deadline <= now {
            self.insert_at(position, probe);
            Placement::Inserted(position)
        } else {
            self.rotating.push(probe);
            Placement::Rotated
        }
    }

    /// Evicts tail probes while the queue is at or above either quota.
    pub fn trim_to_quota(&mut self, state: &SharedState) -> Vec<Probe> {
        let mut evicted = Vec::new();
        while self.entries.len() as u64 >= state.probe_quota || self.load >= state.load_quota {
            let Some(q) = self.entries.pop_back() else { break };
            self.load -= q.runtime_estimate;
            evicted.push(q.clone());
            self.rotating.push(q);
        }
        evicted
    }

    pub fn pop_head(&mut self) -> Option<Probe> {
        let p = self.entries.pop_front()?;
        self.load -= p.runtime_estimate;
        Some(p)
    }

    /// Empties the rotation buffer.
    pub fn take_rotating(&mut self) -> Vec<Probe> {
        std::mem::take(&mut self.rotating)
    }

    fn insert_at(&mut self, position: usize, probe: Probe) {
        self.load += probe.runtime_estimate;
        self.entries.insert(position, probe);
    }

    /// Recomputes α from scratch; test and audit helper.
    pub fn recomputed_load(&self) -> Micros {
        self.entries.iter().map(|p| p.runtime_estimate).sum()
    }
}
