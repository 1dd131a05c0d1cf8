//! Toll processing over a small road: position reports update a segment's
//! average speed and vehicle set, then a toll is computed from both.
//!
//! cargo run --release --example toll_processing

use std::collections::BTreeMap;

use txstream::apps::{AppKind, BenchApp, TollProcessing, TpOutput, WorkloadConfig};
use txstream::{Engine, EngineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut workload = WorkloadConfig::new(AppKind::Tp);
    workload.event_count = 30_000;
    workload.table_size = 10;
    workload.vehicles = 400;

    let (logic, registry, store) = TollProcessing::setup(&workload)?;
    let config = EngineConfig {
        executors: 4,
        interval: 300,
        ..EngineConfig::default()
    };
    let engine = Engine::new(logic, registry, store, config)?;
    let out = engine.run(TollProcessing::stream(&workload))?;

    let mut tolls: BTreeMap<i64, usize> = BTreeMap::new();
    let mut notices = 0;
    for r in &out.records {
        if let TpOutput::Toll { toll, .. } = r.output {
            notices += 1;
            *tolls.entry(toll).or_default() += 1;
        }
    }
    println!("{} events in {} batches, {notices} toll notices", out.records.len(), out.batches.len());
    for (toll, n) in tolls.iter().rev().take(5) {
        println!("toll {toll:>6}: {n} vehicles");
    }
    Ok(())
}
