//! GrepSum under every concurrency-control scheme, checked against the
//! serial oracle. No-Lock skips ordering altogether and is expected to
//! diverge; it only marks a throughput ceiling.
//!
//! cargo run --release --example compare_schemes [threads]

use txstream::apps::AppKind;
use txstream::harness::{self, RunConfig};
use txstream::Scheme;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let threads = std::env::args().nth(1).map_or(Ok(4), |a| a.parse())?;
    println!("{:<8} {:>12} {:>9} {:>9}  oracle", "scheme", "events/s", "p99 ms", "rejected");
    for scheme in Scheme::ALL {
        let config = RunConfig {
            app: AppKind::Gs,
            scheme,
            threads,
            events: 100_000,
            read_ratio: 0.0,
            skew: Some(0.6),
            ..RunConfig::default()
        };
        let report = harness::run(&config)?;
        let m = &report.metrics;
        let verdict = match &report.oracle {
            Some(o) if o.matches() => "match",
            Some(_) => "DIVERGED",
            None => "skipped",
        };
        println!(
            "{:<8} {:>12.0} {:>9.2} {:>9}  {verdict}",
            scheme.to_string(),
            m.throughput_eps,
            m.p99_ms,
            m.rejected
        );
    }
    Ok(())
}
