use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elastic_queue::BypassRule;
use crate::error::SimError;
use crate::time::Micros;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Peacock,
    Sparrow,
    Eagle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Peacock, Algorithm::Sparrow, Algorithm::Eagle];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Peacock => "peacock",
            Algorithm::Sparrow => "sparrow",
            Algorithm::Eagle => "eagle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "peacock" => Ok(Algorithm::Peacock),
            "sparrow" => Ok(Algorithm::Sparrow),
            "eagle" => Ok(Algorithm::Eagle),
            other => Err(format!("unknown algorithm `{other}` (expected peacock, sparrow or eagle)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeacockConfig {
    pub bypass_rule: BypassRule,
}

impl Default for PeacockConfig {
    fn default() -> Self {
        PeacockConfig { bypass_rule: BypassRule::Guarded }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparrowConfig {
    /// Probes per task.
    pub probe_ratio: u32,
}

impl Default for SparrowConfig {
    fn default() -> Self {
        SparrowConfig { probe_ratio: 2 }
    }
}

/// Static parameters of the Eagle model. The defaults are assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EagleConfig {
    /// A stage is long iff its estimate exceeds this.
    pub long_job_cutoff: Micros,
    /// Share of workers reserved for short stages.
    pub short_partition_fraction: f64,
    pub probe_ratio: u32,
    /// Longest time a queued probe may be bypassed by shorter ones.
    pub srpt_starvation_bound: Micros,
}

impl Default for EagleConfig {
    fn default() -> Self {
        EagleConfig {
            long_job_cutoff: Micros::from_secs(30),
            short_partition_fraction: 0.15,
            probe_ratio: 2,
            srpt_starvation_bound: Micros::from_secs(300),
        }
    }
}

/// How a scheduler picks target workers for a stage's probes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Uniform random, distinct while the stage fits in the cluster.
    #[default]
    Random,
    /// Consecutive workers from a per-scheduler cursor. Used by hand-traced
    /// fixtures where placement must be known in advance.
    RoundRobin,
}

/// How arriving jobs are assigned to schedulers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobRouting {
    #[default]
    RoundRobin,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub workers: u32,
    pub schedulers: u32,
    pub rotation_interval: Micros,
    pub network_delay: Micros,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub peacock: PeacockConfig,
    pub sparrow: SparrowConfig,
    pub eagle: EagleConfig,
    pub targets: TargetPolicy,
    pub routing: JobRouting,
    /// Offset each worker's rotation rounds by a seeded phase in `[0, R)`.
    pub tick_jitter: bool,
    /// Abort after this many processed events.
    pub max_events: u64,
    /// Check per-timestamp worker invariants while running.
    pub audit: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            workers: 100,
            schedulers: 10,
            rotation_interval: Micros::from_secs(1),
            network_delay: Micros::from_millis(5),
            seed: 0,
            algorithm: Algorithm::Peacock,
            peacock: PeacockConfig::default(),
            sparrow: SparrowConfig::default(),
            eagle: EagleConfig::default(),
            targets: TargetPolicy::Random,
            routing: JobRouting::RoundRobin,
            tick_jitter: false,
            max_events: 2_000_000_000,
            audit: true,
        }
    }
}

impl SimConfig {
    pub fn new(algorithm: Algorithm, workers: u32, schedulers: u32, seed: u64) -> Self {
        SimConfig { algorithm, workers, schedulers, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.workers == 0 {
            return bad("at least one worker is required");
        }
        if self.schedulers == 0 {
            return bad("at least one scheduler is required");
        }
        if self.rotation_interval.is_zero() {
            return bad("rotation interval must be positive");
        }
        if self.sparrow.probe_ratio == 0 || self.eagle.probe_ratio == 0 {
            return bad("probe ratio must be at least 1");
        }
        let f = self.eagle.short_partition_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad("eagle short partition fraction must lie in (0, 1)");
        }
        Ok(())
    }
}
