//! Throughput, latency percentiles and the breakdown of one run.

use crate::metrics::{Breakdown, PhaseTimers};
use crate::scheduler::SinkRecord;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    /// Post-warmup events per second.
    pub throughput_eps: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub breakdown: Breakdown,
    pub rejected: usize,
    /// Per-table state digests after the run.
    pub digests: Vec<u64>,
    /// Batches evaluated (chain-based scheme only).
    pub batches: usize,
    /// Wall time per punctuation interval.
    pub mean_batch_period_ms: f64,
    /// Most extra versions alive in any batch.
    pub peak_versions: usize,
    /// Largest per-record version count seen after any batch's gc.
    pub versions_after_gc: usize,
    pub wall_ms: f64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn record_breakdown(timers: &[PhaseTimers]) -> Breakdown {
    let mut all = PhaseTimers::default();
    for t in timers {
        all.merge(t);
    }
    all.breakdown()
}

/// Throughput and latency over events with `seq >= warmup`.
pub fn throughput_and_latency<O>(records: &[SinkRecord<O>], warmup: usize) -> (f64, [f64; 3]) {
    let post: Vec<&SinkRecord<O>> = records.iter().filter(|r| r.seq >= warmup as u64).collect();
    if post.is_empty() {
        return (0.0, [0.0; 3]);
    }
    let start = post.iter().map(|r| r.ingest_ns).min().unwrap();
    let end = post.iter().map(|r| r.emit_ns).max().unwrap();
    let span = (end.saturating_sub(start)).max(1) as f64 / 1e9;
    let mut lat: Vec<u64> = post.iter().map(|r| r.latency_ns()).collect();
    lat.sort_unstable();
    let ms = |p| percentile(&lat, p) as f64 / 1e6;
    (post.len() as f64 / span, [ms(50.0), ms(95.0), ms(99.0)])
}
