//! Event payloads exchanged between simulated entities.

use serde::{Deserialize, Serialize};

use crate::elastic_queue::{Probe, SharedState};
use crate::ids::{Entity, JobId, ProbeKey, SchedulerId, TaskRef, WorkerId};
use crate::time::Micros;

/// Probes of one stage sharing a rotation message. The stage header is
/// carried once; per-probe data is just the index and hop count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeGroup {
    pub job: JobId,
    pub stage: u32,
    pub owner: SchedulerId,
    pub job_arrival: Micros,
    pub threshold: Micros,
    pub runtime_estimate: Micros,
    /// (probe index, hop count including the hop this message makes).
    pub probes: Vec<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationMessage {
    pub sender: WorkerId,
    pub groups: Vec<ProbeGroup>,
    pub state: SharedState,
}

impl RotationMessage {
    /// Packs probes, grouping consecutive-or-not probes of the same stage
    /// under one header. Group order follows first appearance.
    pub fn pack(sender: WorkerId, probes: Vec<Probe>, state: SharedState) -> Self {
        let mut groups: Vec<ProbeGroup> = Vec::new();
        for p in probes {
            let found = groups.iter_mut().find(|g| g.job == p.key.job && g.stage == p.key.stage);
            match found {
                Some(g) => g.probes.push((p.key.index, p.rotations)),
                None => groups.push(ProbeGroup {
                    job: p.key.job,
                    stage: p.key.stage,
                    owner: p.owner,
                    job_arrival: p.job_arrival,
                    threshold: p.threshold,
                    runtime_estimate: p.runtime_estimate,
                    probes: vec![(p.key.index, p.rotations)],
                }),
            }
        }
        RotationMessage { sender, groups, state }
    }

    pub fn probe_count(&self) -> usize {
        self.groups.iter().map(|g| g.probes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Expands the groups back into probes stamped with `arrival`.
    pub fn unpack(&self, arrival: Micros) -> Vec<Probe> {
        let mut out = Vec::with_capacity(self.probe_count());
        for g in &self.groups {
            for &(index, rotations) in &g.probes {
                out.push(Probe {
                    key: ProbeKey { job: g.job, stage: g.stage, index },
                    owner: g.owner,
                    job_arrival: g.job_arrival,
                    runtime_estimate: g.runtime_estimate,
                    threshold: g.threshold,
                    probe_arrival: arrival,
                    rotations,
                    long: false,
                    resampled: false,
                });
            }
        }
        out
    }
}

/// Signed change to a scheduler aggregate, broadcast to peers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerUpdate {
    pub sign: Sign,
    pub count: u64,
    pub load: Micros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// Index into the run's workload.
    JobArrival(usize),
    ProbeSubmit {
        probe: Probe,
        state: Option<SharedState>,
    },
    RotationBatch(RotationMessage),
    TaskRequest {
        probe: ProbeKey,
        worker: WorkerId,
        rotations: u32,
    },
    TaskAssign {
        task: TaskRef,
        duration: Micros,
        state: Option<SharedState>,
    },
    TaskCancel {
        probe: ProbeKey,
    },
    TaskFinishNotify {
        task: TaskRef,
        worker: WorkerId,
        finished_at: Micros,
    },
    PeerUpdate(PeerUpdate),
    RotationTick,
    TaskComplete,
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::JobArrival(_) => MessageKind::JobArrival,
            Payload::ProbeSubmit { .. } => MessageKind::ProbeSubmit,
            Payload::RotationBatch(_) => MessageKind::RotationBatch,
            Payload::TaskRequest { .. } => MessageKind::TaskRequest,
            Payload::TaskAssign { .. } => MessageKind::TaskAssign,
            Payload::TaskCancel { .. } => MessageKind::TaskCancel,
            Payload::TaskFinishNotify { .. } => MessageKind::TaskFinishNotify,
            Payload::PeerUpdate(_) => MessageKind::PeerUpdate,
            Payload::RotationTick => MessageKind::RotationTick,
            Payload::TaskComplete => MessageKind::TaskComplete,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    JobArrival,
    ProbeSubmit,
    RotationBatch,
    TaskRequest,
    TaskAssign,
    TaskCancel,
    TaskFinishNotify,
    PeerUpdate,
    RotationTick,
    TaskComplete,
}

/// How an outgoing payload is delivered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    /// After the configured network delay.
    Network,
    /// Local timer firing at an absolute time; no network delay.
    At(Micros),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub to: Entity,
    pub payload: Payload,
    pub delivery: Delivery,
}

/// Handler context: the current clock and a buffer for emitted messages.
pub struct Ctx<'a> {
    pub now: Micros,
    pub out: &'a mut Vec<Outgoing>,
}

impl Ctx<'_> {
    pub fn send(&mut self, to: Entity, payload: Payload) {
        self.out.push(Outgoing { to, payload, delivery: Delivery::Network });
    }

    pub fn timer(&mut self, to: Entity, at: Micros, payload: Payload) {
        self.out.push(Outgoing { to, payload, delivery: Delivery::At(at) });
    }
}
