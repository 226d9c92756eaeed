//! Identifiers shared by every simulated entity.

use serde::{Deserialize, Serialize};

pub type JobId = u64;
pub type WorkerId = u32;
pub type SchedulerId = u32;

/// Identifies one probe: the stage it belongs to and its index within the
/// stage. Under fixed binding the index is also the task index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProbeKey {
    pub job: JobId,
    pub stage: u32,
    pub index: u32,
}

/// Identifies one task of a job stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskRef {
    pub job: JobId,
    pub stage: u32,
    pub task: u32,
}

/// A simulated process that can receive events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    Worker(WorkerId),
    Scheduler(SchedulerId),
}
