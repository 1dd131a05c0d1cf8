//! Key popularity under the Zipf sampler and the first events of each
//! benchmark stream. Streams are a pure function of the seed.
//!
//! cargo run --release --example zipf_workload

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use txstream::apps::{
    dump_trace, AppKind, BenchApp, Bidding, GrepSum, Ledger, TollProcessing, WorkloadConfig,
    ZipfSampler,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for theta in [0.0, 0.6, 1.0] {
        let z = ZipfSampler::new(1_000, theta);
        let mut hits = [0u32; 1_000];
        for _ in 0..100_000 {
            hits[z.sample(&mut rng) as usize] += 1;
        }
        let top: u32 = hits[..10].iter().sum();
        println!("theta {theta}: 10 hottest keys draw {:.1}% of accesses", top as f64 / 1e3);
    }

    for app in [AppKind::Gs, AppKind::Sl, AppKind::Ob, AppKind::Tp] {
        let mut cfg = WorkloadConfig::new(app);
        cfg.event_count = 3;
        println!("--- {app}");
        match app {
            AppKind::Gs => GrepSum::stream(&cfg).for_each(|e| println!("{e:?}")),
            AppKind::Sl => Ledger::stream(&cfg).for_each(|e| println!("{e:?}")),
            AppKind::Ob => Bidding::stream(&cfg).for_each(|e| println!("{e:?}")),
            AppKind::Tp => TollProcessing::stream(&cfg).for_each(|e| println!("{e:?}")),
        }
    }
    let mut cfg = WorkloadConfig::new(AppKind::Sl);
    cfg.event_count = 10_000;
    let mut bytes = Vec::new();
    dump_trace::<Ledger>(&cfg, 500, &mut bytes)?;
    println!("binary dump of 10k ledger events: {} bytes", bytes.len());
    Ok(())
}
