//! Experiment driver: one run or a parameter sweep, with oracle checking
//! and CSV output.
//!
//! CSV columns, in order: app, scheme, threads, interval, skew,
//! read_ratio, mp_ratio, mp_length, placement, seed, events,
//! throughput_eps, p50_ms, p95_ms, p99_ms, useful_ns, sync_ns, lock_ns,
//! others_ns, rejected, digest_tables, oracle_match.
//!
//! Breakdown columns are mean nanoseconds per transaction and only cover
//! transaction processing, not event pre- and post-processing.
//! `digest_tables` lists the per-table digests in hex, joined by `:`.
//! `oracle_match` is `true`, `false` or `skipped`.

pub mod config;
pub mod metrics;

use std::fs::File;
use std::io::{self, BufWriter, Write};

use thiserror::Error;

use crate::apps::{dump_trace, AppKind, BenchApp, Bidding, GrepSum, Ledger, TollProcessing};
use crate::error::{ConfigError, EngineError};
use crate::model::{BlotterStatus, Timestamp};
use crate::oracle::SerialOracle;
use crate::scheduler::Engine;
use crate::trace::TRACE_HEADER;

pub use config::RunConfig;
pub use metrics::{percentile, record_breakdown, RunMetrics};

pub const CSV_HEADER: [&str; 22] = [
    "app",
    "scheme",
    "threads",
    "interval",
    "skew",
    "read_ratio",
    "mp_ratio",
    "mp_length",
    "placement",
    "seed",
    "events",
    "throughput_eps",
    "p50_ms",
    "p95_ms",
    "p99_ms",
    "useful_ns",
    "sync_ns",
    "lock_ns",
    "others_ns",
    "rejected",
    "digest_tables",
    "oracle_match",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("state diverged from the serial execution: {0}")]
    OracleMismatch(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::OracleMismatch(_) => 2,
            _ => 1,
        }
    }
}

/// Outcome of comparing a run with the serial oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleCheck {
    pub digests_match: bool,
    /// First event whose status, read results or output differ.
    pub first_divergence: Option<Timestamp>,
    pub oracle_rejected: usize,
}

impl OracleCheck {
    pub fn matches(&self) -> bool {
        self.digests_match && self.first_divergence.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub metrics: RunMetrics,
    pub oracle: Option<OracleCheck>,
}

impl RunReport {
    /// `Err` when an order-preserving scheme diverged from the oracle.
    pub fn verdict(&self) -> Result<(), HarnessError> {
        match &self.oracle {
            Some(o) if !o.matches() && self.config.scheme.is_ordered() => {
                Err(HarnessError::OracleMismatch(match o.first_divergence {
                    Some(ts) => format!("first divergent event at ts {ts}"),
                    None => "final state digests differ".into(),
                }))
            }
            _ => Ok(()),
        }
    }

    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.config;
        let m = &self.metrics;
        let w = c.workload();
        let digests: Vec<String> = m.digests.iter().map(|d| format!("{d:016x}")).collect();
        vec![
            c.app.to_string(),
            c.scheme.to_string(),
            c.threads.to_string(),
            c.interval.to_string(),
            w.skew.to_string(),
            c.read_ratio.to_string(),
            c.mp_ratio.to_string(),
            c.mp_length.to_string(),
            c.placement.to_string(),
            c.seed.to_string(),
            c.events.to_string(),
            format!("{:.1}", m.throughput_eps),
            format!("{:.4}", m.p50_ms),
            format!("{:.4}", m.p95_ms),
            format!("{:.4}", m.p99_ms),
            format!("{:.1}", m.breakdown.useful_ns),
            format!("{:.1}", m.breakdown.sync_ns),
            format!("{:.1}", m.breakdown.lock_ns),
            format!("{:.1}", m.breakdown.others_ns),
            m.rejected.to_string(),
            digests.join(":"),
            match &self.oracle {
                Some(o) => o.matches().to_string(),
                None => "skipped".into(),
            },
        ]
    }
}

pub fn write_csv<'a>(
    out: impl Write,
    reports: impl IntoIterator<Item = &'a RunReport>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Executes one configured run. An oracle divergence is reported in the
/// result, not as an error; see [`RunReport::verdict`].
pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    match config.app {
        AppKind::Gs => run_app::<GrepSum>(config),
        AppKind::Sl => run_app::<Ledger>(config),
        AppKind::Ob => run_app::<Bidding>(config),
        AppKind::Tp => run_app::<TollProcessing>(config),
    }
}

pub fn run_app<A: BenchApp>(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let workload = config.workload();
    if let Some(path) = &config.dump_events {
        dump_trace::<A>(&workload, config.interval, BufWriter::new(File::create(path)?))?;
    }
    let check = config.oracle_enabled();
    let (logic, registry, store) = A::setup(&workload)?;
    let engine = Engine::new(logic, registry, store, config.engine(check))?;
    let out = engine.run(A::stream(&workload))?;

    if let Some(path) = &config.trace {
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(f, "{TRACE_HEADER}")?;
        for b in &out.batches {
            for t in &b.trace {
                writeln!(f, "{t}")?;
            }
        }
        f.flush()?;
    }

    let digests = engine.store().digests();
    let oracle = if check {
        let (logic, registry, store) = A::setup(&workload)?;
        let mut serial = SerialOracle::from_store(&store);
        let expected = serial.run(&logic, &registry, A::stream(&workload), config.interval)?;
        let first_divergence = if expected.len() != out.records.len() {
            Some(Timestamp(0))
        } else {
            expected
                .iter()
                .zip(&out.records)
                .find(|(e, r)| {
                    e.ts != r.ts
                        || e.status != r.status
                        || r.results.as_ref() != Some(&e.results)
                        || e.output != r.output
                })
                .map(|(e, _)| e.ts)
        };
        Some(OracleCheck {
            digests_match: serial.digests() == digests,
            first_divergence,
            oracle_rejected: expected
                .iter()
                .filter(|e| e.status == BlotterStatus::Rejected)
                .count(),
        })
    } else {
        None
    };

    let (throughput_eps, [p50_ms, p95_ms, p99_ms]) =
        metrics::throughput_and_latency(&out.records, config.warmup());
    let intervals = out.ingest.punctuations.max(1) as f64;
    let metrics = RunMetrics {
        throughput_eps,
        p50_ms,
        p95_ms,
        p99_ms,
        breakdown: out.timers.breakdown(),
        rejected: out.rejected(),
        digests,
        batches: out.batches.len(),
        mean_batch_period_ms: out.wall.as_secs_f64() * 1e3 / intervals,
        peak_versions: out.batches.iter().map(|b| b.peak_versions).max().unwrap_or(0),
        versions_after_gc: out.batches.iter().map(|b| b.versions_after_gc).max().unwrap_or(1),
        wall_ms: out.wall.as_secs_f64() * 1e3,
    };
    Ok(RunReport {
        config: config.clone(),
        metrics,
        oracle,
    })
}

/// Runs `template` once per value of `axis`, in order, each time with the
/// option named `axis` set to that value.
pub fn sweep(
    template: &RunConfig,
    axis: &str,
    values: &[String],
) -> Result<Vec<RunReport>, HarnessError> {
    let mut points = Vec::with_capacity(values.len());
    for v in values {
        let mut c = template.clone();
        c.set(axis, v)?;
        c.validate()?;
        points.push(c);
    }
    points.iter().map(run).collect()
}

/// Parses `name=v1,v2,...`.
pub fn parse_axis(text: &str) -> Result<(String, Vec<String>), ConfigError> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("axis must look like name=v1,v2: {text:?}")))?;
    let values = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    Ok((name.trim().to_string(), values))
}
