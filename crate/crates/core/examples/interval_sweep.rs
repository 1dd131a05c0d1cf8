//! Sweeps the punctuation interval with the harness and prints CSV rows.
//! Longer intervals mean bigger batches: more throughput, more latency.
//!
//! cargo run --release --example interval_sweep

use txstream::harness::{self, parse_axis, RunConfig};
use txstream::apps::AppKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = RunConfig {
        app: AppKind::Tp,
        threads: 4,
        events: 60_000,
        ..RunConfig::default()
    };
    let (axis, values) = parse_axis("interval=10,50,100,500,1000")?;
    let reports = harness::sweep(&template, &axis, &values)?;
    harness::write_csv(std::io::stdout(), &reports)?;
    for r in &reports {
        println!(
            "# interval {:>5}: {:>9.0} events/s, p99 {:.2} ms, batch period {:.2} ms",
            r.config.interval, r.metrics.throughput_eps, r.metrics.p99_ms, r.metrics.mean_batch_period_ms
        );
    }
    Ok(())
}
