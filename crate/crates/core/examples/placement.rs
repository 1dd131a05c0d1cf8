//! Chain placement policies. Shared-nothing routes every chain to a fixed
//! worker by hash; shared-everything lets idle workers pick up any chain;
//! groups share a pool among a few workers. Prints how evenly tasks were
//! spread over workers.
//!
//! cargo run --release --example placement

use txstream::apps::{AppKind, BenchApp, GrepSum, WorkloadConfig};
use txstream::restructure::{Placement, PlacementPolicy};
use txstream::{Engine, EngineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut workload = WorkloadConfig::new(AppKind::Gs);
    workload.event_count = 50_000;
    workload.skew = 0.9;
    workload.read_ratio = 0.0;

    for kind in [Placement::SharedNothing, Placement::SharedGroup(2), Placement::SharedEverything] {
        let (logic, registry, store) = GrepSum::setup(&workload)?;
        let config = EngineConfig {
            executors: 4,
            placement: PlacementPolicy::new(kind),
            ..EngineConfig::default()
        };
        let engine = Engine::new(logic, registry, store, config)?;
        let out = engine.run(GrepSum::stream(&workload))?;
        let mut per_worker = vec![0usize; 4];
        for b in &out.batches {
            for (w, n) in b.worker_tasks.iter().enumerate() {
                per_worker[w] += n;
            }
        }
        println!("{kind:<18} tasks per worker {per_worker:?}  wall {:?}", out.wall);
    }
    Ok(())
}
