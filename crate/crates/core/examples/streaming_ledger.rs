//! Streaming Ledger with balances too small to cover most transfers.
//! Rejected transfers must leave no trace, so the engine's final tables
//! equal the serial oracle's and no balance ever goes negative.
//!
//! cargo run --release --example streaming_ledger

use txstream::apps::{BenchApp, Ledger, SlEvent, SlOutput, WorkloadConfig, AppKind};
use txstream::oracle::SerialOracle;
use txstream::{Engine, EngineConfig, StateRef, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut workload = WorkloadConfig::new(AppKind::Sl);
    workload.event_count = 20_000;
    workload.initial_balance = 60;
    workload.table_size = 1_000;

    let (logic, registry, store) = Ledger::setup(&workload)?;
    let config = EngineConfig {
        executors: 4,
        record_results: true,
        ..EngineConfig::default()
    };
    let engine = Engine::new(logic, registry, store, config)?;
    let out = engine.run(Ledger::stream(&workload))?;

    let events: Vec<SlEvent> = Ledger::stream(&workload).collect();
    let transfers = events.iter().filter(|e| matches!(e, SlEvent::Transfer { .. })).count();
    let rejected = out.records.iter().filter(|r| r.output == SlOutput::Rejected).count();
    println!("{transfers} transfers, {rejected} rejected");

    let (logic, registry, store) = Ledger::setup(&workload)?;
    let mut oracle = SerialOracle::from_store(&store);
    oracle.run(&logic, &registry, events, engine.config().interval)?;
    println!("digests match oracle: {}", oracle.digests() == engine.store().digests());

    let ledger = engine.logic();
    let negative = [ledger.accounts, ledger.assets]
        .into_iter()
        .flat_map(|t| (0..workload.table_size).map(move |k| StateRef::new(t, k)))
        .filter(|&s| matches!(engine.store().latest(s), Ok(Value::Int(v)) if v < 0))
        .count();
    println!("negative balances: {negative}");
    Ok(())
}
