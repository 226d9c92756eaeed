//! Discrete-event simulator for probe-based cluster scheduling.
//!
//! Peacock workers form a ring and keep elastic queues bounded by a shared
//! cluster-wide state; probes that do not fit are rotated to the successor.
//! Sparrow and Eagle baselines run on the same engine and workloads.

pub mod baselines;
pub mod config;
pub mod elastic_queue;
pub mod engine;
pub mod error;
pub mod ids;
pub mod message;
pub mod metrics;
pub mod rng;
pub mod scheduler;
pub mod time;
pub mod worker;
pub mod workload;

pub use config::{Algorithm, EagleConfig, JobRouting, PeacockConfig, SimConfig, SparrowConfig, TargetPolicy};
pub use elastic_queue::{BypassRule, EnqueueOutcome, Placement, Probe, SharedState, Version, WaitingQueue};
pub use engine::{run, Counters, Engine, MessageCounts, RunResult};
pub use error::{MetricsError, SimError, TraceError};
pub use ids::{Entity, JobId, ProbeKey, SchedulerId, TaskRef, WorkerId};
pub use metrics::{fraction_faster, report_for, summarize, JobRecord, Report};
pub use scheduler::{Aggregate, Scheduler};
pub use time::Micros;
pub use workload::{generate, Job, Stage, SyntheticSpec};
