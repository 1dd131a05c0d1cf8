//! Shows executors switching between compute mode and state-access mode.
//! Every executor arrives at the punctuation, the batch is evaluated once,
//! and only then does anyone resume.
//!
//! cargo run --release --example dual_mode

use txstream::apps::{AppKind, BenchApp, GrepSum, WorkloadConfig};
use txstream::{Engine, EngineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut workload = WorkloadConfig::new(AppKind::Gs);
    workload.event_count = 1_000;

    let (logic, registry, store) = GrepSum::setup(&workload)?;
    let config = EngineConfig {
        executors: 3,
        interval: 400,
        ..EngineConfig::default()
    };
    let engine = Engine::new(logic, registry, store, config)?;
    let out = engine.run(GrepSum::stream(&workload))?;

    for e in &out.mode_log {
        println!(
            "#{:<3} batch {} executor {} {:?} ({} cached)",
            e.order, e.batch, e.executor, e.phase, e.cached
        );
    }
    for b in &out.batches {
        println!(
            "batch {}: {} txns, {} ops, {} tasks in {} levels, {} passes",
            b.batch_id, b.transactions, b.ops, b.tasks, b.levels, b.passes
        );
    }
    Ok(())
}
