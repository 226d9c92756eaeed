use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use peacock_cli::{emit, execute, Format, Mix, Scenario};
use peacock_core::{Algorithm, BypassRule, Micros};

#[derive(Parser)]
#[command(name = "peacock", version, about = "Discrete-event simulator for probe-based cluster schedulers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one algorithm.
    Run {
        #[arg(long, default_value = "peacock")]
        algo: Algorithm,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate several algorithms on a shared workload and compare them.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "peacock,sparrow,eagle")]
        algos: Vec<Algorithm>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MixArg {
    Heterogeneous,
    Homogeneous,
}

#[derive(Clone, Copy, ValueEnum)]
enum BypassArg {
    Guarded,
    Literal,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    schedulers: u32,
    /// Offered load as a fraction of cluster capacity.
    #[arg(long, default_value_t = 0.8)]
    load: f64,
    /// Number of synthetic jobs.
    #[arg(long, default_value_t = 1000, conflicts_with = "trace")]
    jobs: usize,
    /// JSONL job trace (optionally gzipped) instead of a synthetic workload.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "heterogeneous", conflicts_with = "trace")]
    mix: MixArg,
    #[arg(long, default_value = "1s", value_parser = humantime::parse_duration)]
    rotation_interval: std::time::Duration,
    #[arg(long, default_value = "5ms", value_parser = humantime::parse_duration)]
    net_delay: std::time::Duration,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run seeds `seed..seed+k`, one report row per seed.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Bypass test used by Peacock's elastic queues.
    #[arg(long, value_enum, default_value = "guarded")]
    bypass: BypassArg,
    /// Stagger the workers' rotation rounds by a seeded phase.
    #[arg(long)]
    tick_jitter: bool,
    /// Directory for report and per-job record files; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

fn micros(d: std::time::Duration) -> Micros {
    Micros(d.as_micros().min(u64::MAX as u128) as u64)
}

fn usage_error(kind: ErrorKind, msg: &str) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (algos, common) = match cli.command {
        Command::Run { algo, common } => (vec![algo], common),
        Command::Compare { algos, common } => {
            let mut distinct = algos.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() < 2 || distinct.len() != algos.len() {
                usage_error(ErrorKind::InvalidValue, "compare needs at least two distinct algorithms");
            }
            (algos, common)
        }
    };
    if !(common.load.is_finite() && common.load > 0.0) {
        usage_error(ErrorKind::InvalidValue, "--load must be a positive number");
    }
    if common.trace.is_none() && common.jobs == 0 {
        usage_error(ErrorKind::InvalidValue, "--jobs must be at least 1");
    }
    if common.rotation_interval.is_zero() {
        usage_error(ErrorKind::InvalidValue, "--rotation-interval must be positive");
    }

    let scenario = Scenario {
        workers: common.workers,
        schedulers: common.schedulers,
        load: common.load,
        jobs: common.jobs,
        trace: common.trace,
        mix: match common.mix {
            MixArg::Heterogeneous => Mix::Heterogeneous,
            MixArg::Homogeneous => Mix::Homogeneous,
        },
        rotation_interval: micros(common.rotation_interval),
        network_delay: micros(common.net_delay),
        bypass: match common.bypass {
            BypassArg::Guarded => BypassRule::Guarded,
            BypassArg::Literal => BypassRule::Literal,
        },
        tick_jitter: common.tick_jitter,
    };
    let format = match common.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    let seeds: Vec<u64> = (0..common.seeds).map(|i| common.seed.wrapping_add(i)).collect();

    match execute(&scenario, &algos, &seeds).and_then(|o| emit(&o, format, common.out.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
