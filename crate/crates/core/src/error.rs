use thiserror::Error;

use crate::ids::ProbeKey;
use crate::time::Micros;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid probe {0:?}: runtime estimate must be positive")]
    InvalidProbe(ProbeKey),

    #[error("invalid job {job}: {reason}")]
    InvalidJob { job: u64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol violation at {at}: {detail}")]
    Protocol { at: Micros, detail: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("run did not terminate after {events} events (clock {now}, {pending} pending events)")]
    NonTermination { events: u64, now: Micros, pending: usize },
}

impl SimError {
    pub(crate) fn protocol(at: Micros, detail: impl Into<String>) -> Self {
        SimError::Protocol { at, detail: detail.into() }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed trace at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no job records to summarize")]
    Empty,

    #[error("runs cover different job sets: {0}")]
    MismatchedJobs(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
