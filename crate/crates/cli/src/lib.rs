//! Library half of the `peacock` binary: workload construction, run
//! orchestration and report writing. Kept separate from argument parsing so
//! that it can be driven from tests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use peacock_core::metrics::{self, DEFAULT_CDF_POINTS};
use peacock_core::workload::{self, generate, SyntheticSpec};
use peacock_core::{fraction_faster, report_for, Algorithm, BypassRule, Job, Micros, Report, RunResult, SimConfig};
use serde::Serialize;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mix {
    Heterogeneous,
    Homogeneous,
}

/// Everything that defines a simulated cluster and its workload, minus the
/// algorithm and seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub workers: u32,
    pub schedulers: u32,
    pub load: f64,
    pub jobs: usize,
    pub trace: Option<PathBuf>,
    pub mix: Mix,
    pub rotation_interval: Micros,
    pub network_delay: Micros,
    pub bypass: BypassRule,
    pub tick_jitter: bool,
}

impl Scenario {
    pub fn config(&self, algorithm: Algorithm, seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(algorithm, self.workers, self.schedulers, seed);
        cfg.rotation_interval = self.rotation_interval;
        cfg.network_delay = self.network_delay;
        cfg.peacock.bypass_rule = self.bypass;
        cfg.tick_jitter = self.tick_jitter;
        cfg
    }

    /// Builds the job list shared by every algorithm for `seed`.
    pub fn workload(&self, seed: u64) -> Result<Vec<Job>> {
        match &self.trace {
            Some(path) => {
                let trace = workload::load_trace(path).with_context(|| format!("reading trace {}", path.display()))?;
                if trace.pruned > 0 {
                    log::warn!("pruned {} invalid trace records", trace.pruned);
                }
                let jobs = workload::jobs_from_trace(&trace.records, self.load, self.workers, seed);
                anyhow::ensure!(!jobs.is_empty(), "trace {} has no usable jobs", path.display());
                Ok(jobs)
            }
            None => {
                let spec = match self.mix {
                    Mix::Heterogeneous => SyntheticSpec::heterogeneous(self.load, self.jobs, seed),
                    Mix::Homogeneous => SyntheticSpec::homogeneous(self.load, self.jobs, seed),
                };
                spec.validate().map_err(anyhow::Error::msg)?;
                Ok(generate(&spec, self.workers).jobs)
            }
        }
    }
}

/// One row of the fraction-faster matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairComparison {
    pub seed: u64,
    pub a: Algorithm,
    pub b: Algorithm,
    pub a_faster: f64,
    pub b_faster: f64,
    pub ties: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Output {
    pub schema_version: u32,
    pub reports: Vec<Report>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fraction_faster: Vec<PairComparison>,
}

pub struct Outcome {
    pub output: Output,
    pub runs: Vec<RunResult>,
}

/// Runs every algorithm on every seed, all algorithms of a seed sharing one
/// workload.
pub fn execute(scenario: &Scenario, algorithms: &[Algorithm], seeds: &[u64]) -> Result<Outcome> {
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    let mut pairs = Vec::new();
    for &seed in seeds {
        let jobs = scenario.workload(seed)?;
        let first = runs.len();
        for &algo in algorithms {
            log::info!("running {algo} seed {seed} on {} jobs", jobs.len());
            let result = peacock_core::run(&scenario.config(algo, seed), jobs.clone())
                .with_context(|| format!("{algo} run with seed {seed} failed"))?;
            reports.push(report_for(&result, DEFAULT_CDF_POINTS)?);
            runs.push(result);
        }
        let seed_runs = &runs[first..];
        for (i, a) in seed_runs.iter().enumerate() {
            for b in &seed_runs[i + 1..] {
                let (a_faster, b_faster, ties) = fraction_faster(&a.records, &b.records)?;
                pairs.push(PairComparison { seed, a: a.algorithm, b: b.algorithm, a_faster, b_faster, ties });
            }
        }
    }
    Ok(Outcome { output: Output { schema_version: OUTPUT_SCHEMA_VERSION, reports, fraction_faster: pairs }, runs })
}

fn write_pairs_csv(out: impl Write, pairs: &[PairComparison]) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "seed,a,b,a_faster,b_faster,ties")?;
    for p in pairs {
        writeln!(w, "{},{},{},{},{},{}", p.seed, p.a, p.b, p.a_faster, p.b_faster, p.ties)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the summary to stdout, or report, matrix and per-job files into
/// the directory `out`.
pub fn emit(outcome: &Outcome, format: Format, out: Option<&Path>) -> Result<()> {
    let Some(dir) = out else {
        let stdout = std::io::stdout().lock();
        match format {
            Format::Json => metrics::write_json(stdout, &outcome.output)?,
            Format::Csv => {
                metrics::write_reports_csv(stdout, &outcome.output.reports)?;
                if !outcome.output.fraction_faster.is_empty() {
                    println!();
                    write_pairs_csv(std::io::stdout().lock(), &outcome.output.fraction_faster)?;
                }
            }
        }
        return Ok(());
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };
    match format {
        Format::Json => metrics::write_json(create("report.json")?, &outcome.output)?,
        Format::Csv => {
            metrics::write_reports_csv(create("report.csv")?, &outcome.output.reports)?;
            if !outcome.output.fraction_faster.is_empty() {
                write_pairs_csv(create("fraction_faster.csv")?, &outcome.output.fraction_faster)?;
            }
        }
    }
    for run in &outcome.runs {
        let name = format!("records-{}-seed{}.csv", run.algorithm, run.seed);
        metrics::write_records_csv(create(&name)?, &run.records)?;
    }
    Ok(())
}
