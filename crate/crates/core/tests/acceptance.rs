//! Acceptance suite. Prints one verdict line per criterion.
//!
//! Correctness criteria (1-4, 10) always gate the exit status. The
//! directional performance criteria (5-9) compare parallel speedups and are
//! only enforced on machines with at least 8 hardware threads, or when
//! TXSTREAM_ENFORCE_PERF=1; elsewhere their verdict is still printed.

mod common;

use std::io::Write;
use std::time::Instant;

use proptest::test_runner::{Config as PropConfig, TestRunner};
use txstream::apps::{
    dump_trace, AppKind, BenchApp, Bidding, GrepSum, Ledger, ObEvent, SlEvent, TollProcessing,
    WorkloadConfig,
};
use txstream::harness::{self, RunConfig, RunReport};
use txstream::oracle::SerialOracle;
use txstream::restructure::Placement;
use txstream::{BlotterStatus, Engine, EngineConfig, Scheme, StateStore, Value};

const ORDERED: [Scheme; 4] = [Scheme::TStream, Scheme::Lock, Scheme::Mvlk, Scheme::Pat];
const APPS: [AppKind; 4] = [AppKind::Gs, AppKind::Sl, AppKind::Ob, AppKind::Tp];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn run(c: RunConfig) -> RunReport {
    harness::run(&c).unwrap_or_else(|e| panic!("{c:?}: {e}"))
}

fn perf(app: AppKind, scheme: Scheme, threads: usize) -> RunConfig {
    RunConfig {
        app,
        scheme,
        threads,
        events: 200_000,
        oracle: Some(false),
        ..RunConfig::default()
    }
}

fn oracle_matrix() -> Verdict {
    let mut runs = 0;
    let mut bad = Vec::new();
    for app in APPS {
        for scheme in ORDERED {
            for threads in [1, 2, 4, 8] {
                for placement in [Placement::SharedNothing, Placement::SharedEverything] {
                    for seed in 1..=3 {
                        let r = run(RunConfig {
                            app,
                            scheme,
                            threads,
                            placement,
                            seed,
                            events: 50_000,
                            interval: 500,
                            oracle: Some(true),
                            ..RunConfig::default()
                        });
                        runs += 1;
                        if !r.oracle.as_ref().is_some_and(|o| o.matches()) {
                            bad.push(format!("{app}/{scheme}/{threads}/{placement}/{seed}"));
                        }
                    }
                }
            }
        }
    }
    verdict(bad.is_empty(), format!("{runs} runs, {} diverged {bad:?}", bad.len()))
}

/// Runs `A` under `scheme`, then replays only the committed events
/// serially. Returns the oracle's per-event rejections, whether the subset
/// replay commits everything and lands on the engine's state, whether the
/// full oracle does, and the engine's final store.
fn committed_subset<A: BenchApp>(
    w: &WorkloadConfig,
    scheme: Scheme,
) -> (Vec<bool>, bool, bool, StateStore) {
    let events: Vec<A::Payload> = A::stream(w).collect();
    let (logic, registry, store) = A::setup(w).unwrap();
    let cfg = EngineConfig {
        executors: 4,
        scheme,
        record_results: true,
        ..EngineConfig::default()
    };
    let engine = Engine::new(logic, registry, store, cfg).unwrap();
    let out = engine.run(events.clone()).unwrap();

    let (logic, registry, store) = A::setup(w).unwrap();
    let mut full = SerialOracle::from_store(&store);
    let expected = full.run(&logic, &registry, events.clone(), 500).unwrap();
    let oracle_rejected: Vec<bool> = expected.iter().map(|e| e.status == BlotterStatus::Rejected).collect();

    let committed: Vec<A::Payload> = out
        .records
        .iter()
        .filter(|r| r.status == BlotterStatus::Committed)
        .map(|r| events[r.seq as usize].clone())
        .collect();
    let mut subset = SerialOracle::from_store(&store);
    let replay = subset.run(&logic, &registry, committed, 500).unwrap();
    let subset_ok = replay.iter().all(|r| r.status == BlotterStatus::Committed)
        && subset.digests() == engine.store().digests();
    let full_ok = full.digests() == engine.store().digests();
    (oracle_rejected, subset_ok, full_ok, engine.into_store())
}

fn abort_atomicity() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    let mut sl = WorkloadConfig::new(AppKind::Sl);
    sl.event_count = 50_000;
    sl.initial_balance = 30;
    let transfers: Vec<bool> = Ledger::stream(&sl).map(|e| matches!(e, SlEvent::Transfer { .. })).collect();
    for scheme in ORDERED {
        let (rejected, subset_ok, full_ok, store) = committed_subset::<Ledger>(&sl, scheme);
        let n_transfers = transfers.iter().filter(|t| **t).count();
        let n_rejected = transfers.iter().zip(&rejected).filter(|(t, r)| **t && **r).count();
        let share = n_rejected as f64 / n_transfers as f64;
        let negative = store
            .snapshot()
            .iter()
            .filter(|(_, v)| v.as_int().is_some_and(|v| v < 0))
            .count();
        pass &= share >= 0.2 && subset_ok && full_ok && negative == 0;
        if scheme == Scheme::TStream {
            notes.push(format!("sl transfers rejected {:.1}%", share * 100.0));
        }
        if !(subset_ok && full_ok && negative == 0) {
            notes.push(format!("sl/{scheme}: subset {subset_ok} full {full_ok} negative {negative}"));
        }
    }

    let mut ob = WorkloadConfig::new(AppKind::Ob);
    ob.event_count = 50_000;
    let bids: Vec<bool> = Bidding::stream(&ob).map(|e| matches!(e, ObEvent::Bid { .. })).collect();
    for scheme in ORDERED {
        let (rejected, subset_ok, full_ok, store) = committed_subset::<Bidding>(&ob, scheme);
        let n_rejected = bids.iter().zip(&rejected).filter(|(b, r)| **b && **r).count();
        let negative = store
            .snapshot()
            .iter()
            .filter(|(_, v)| matches!(v, Value::PriceQty { qty, .. } if *qty < 0))
            .count();
        pass &= n_rejected > 0 && subset_ok && full_ok && negative == 0;
        if scheme == Scheme::TStream {
            notes.push(format!("ob bids rejected {n_rejected}"));
        }
        if !(subset_ok && full_ok && negative == 0) {
            notes.push(format!("ob/{scheme}: subset {subset_ok} full {full_ok} negative {negative}"));
        }
    }
    verdict(pass, notes.join(", "))
}

fn version_lifecycle() -> Verdict {
    let mut w = WorkloadConfig::new(AppKind::Sl);
    w.event_count = 50_000;
    let (logic, registry, store) = Ledger::setup(&w).unwrap();
    let cfg = EngineConfig {
        executors: 4,
        interval: 500,
        ..EngineConfig::default()
    };
    let engine = Engine::new(logic, registry, store, cfg).unwrap();
    let out = engine.run(Ledger::stream(&w)).unwrap();
    let peak = out.batches.iter().map(|b| b.peak_versions).max().unwrap_or(0);
    let after = out.batches.iter().map(|b| b.versions_after_gc).max().unwrap_or(1);
    let resting = engine.store().total_versions() == engine.store().record_count();
    verdict(
        peak <= 2000 && after == 1 && resting,
        format!(
            "{} batches, peak in-batch versions {peak} (limit 2000), max versions per record after gc {after}",
            out.batches.len()
        ),
    )
}

fn cases() -> PropConfig {
    PropConfig {
        failure_persistence: None,
        ..PropConfig::with_cases(1000)
    }
}

fn chain_properties() -> Verdict {
    use common::props::*;
    use proptest::prelude::*;
    let mut failures = Vec::new();
    let mut runner = TestRunner::new(cases());
    if let Err(e) = runner.run(&(scripts(), 1usize..5, placement()), |(ev, w, p)| check_chains(&ev, w, p)) {
        failures.push(format!("chains: {e}"));
    }
    let mut runner = TestRunner::new(cases());
    if let Err(e) = runner.run(&(scripts(), 1usize..4, 1usize..25, any::<bool>()), |(ev, x, i, s)| {
        check_evaluation(&ev, x, i, s)
    }) {
        failures.push(format!("levels: {e}"));
    }
    let mut runner = TestRunner::new(cases());
    if let Err(e) = runner.run(
        &(proptest::collection::vec((any::<bool>(), 1i64..30), 2..40), 1usize..4),
        |(amounts, x)| {
            let cfg = common::config(Scheme::TStream, x, 50, true);
            prop_assert!(common::run_both(&cycle_events(&amounts), 2, 20, cfg).1);
            Ok(())
        },
    ) {
        failures.push(format!("cycles: {e}"));
    }
    verdict(
        failures.is_empty(),
        format!("3 properties x 1000 cases, failures {failures:?}"),
    )
}

fn scalability() -> Verdict {
    let gs = |scheme, threads| RunConfig {
        read_ratio: 0.0,
        skew: Some(0.6),
        events: 1_000_000,
        ..perf(AppKind::Gs, scheme, threads)
    };
    let ts8 = run(gs(Scheme::TStream, 8)).metrics.throughput_eps;
    let lock8 = run(gs(Scheme::Lock, 8)).metrics.throughput_eps;
    let ts1 = run(gs(Scheme::TStream, 1)).metrics.throughput_eps;
    let (vs_lock, self_speedup) = (ts8 / lock8, ts8 / ts1);
    verdict(
        vs_lock >= 1.2 && self_speedup >= 1.5,
        format!(
            "tstream/lock at 8 threads {vs_lock:.2}x (need 1.2), tstream 8/1 threads {self_speedup:.2}x (need 1.5)"
        ),
    )
}

fn skew_tolerance() -> Verdict {
    let gs = |scheme, skew| RunConfig {
        read_ratio: 0.0,
        skew: Some(skew),
        ..perf(AppKind::Gs, scheme, 8)
    };
    let ratio = |scheme| {
        run(gs(scheme, 1.0)).metrics.throughput_eps / run(gs(scheme, 0.0)).metrics.throughput_eps
    };
    let (ts, lock) = (ratio(Scheme::TStream), ratio(Scheme::Lock));
    verdict(ts >= lock, format!("skew 1.0 / skew 0 throughput: tstream {ts:.3}, lock {lock:.3}"))
}

fn multi_partition() -> Verdict {
    let sweep = |scheme| -> Vec<f64> {
        [0.0, 0.25, 0.5, 1.0]
            .iter()
            .map(|&mp| {
                run(RunConfig {
                    mp_ratio: mp,
                    ..perf(AppKind::Gs, scheme, 8)
                })
                .metrics
                .throughput_eps
            })
            .collect()
    };
    let pat = sweep(Scheme::Pat);
    let ts = sweep(Scheme::TStream);
    let decreasing = pat.windows(2).all(|w| w[1] <= w[0] * 1.1) && pat[3] <= pat[0];
    let (lo, hi) = ts.iter().fold((f64::MAX, 0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let spread = hi / lo - 1.0;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.0}", x)).collect::<Vec<_>>().join("/");
    verdict(
        decreasing && spread < 0.15,
        format!(
            "pat at mp 0/25/50/100%: {} (non-increasing: {decreasing}), tstream {} (spread {:.1}%, need <15%)",
            fmt(&pat),
            fmt(&ts),
            spread * 100.0
        ),
    )
}

fn punctuation_interval() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut thr = Vec::new();
    for interval in [10, 50, 100, 500] {
        let r = run(RunConfig {
            interval,
            ..perf(AppKind::Tp, Scheme::TStream, 8)
        });
        let m = &r.metrics;
        let ok = m.p99_ms.is_finite() && m.p99_ms <= 5.0 * m.mean_batch_period_ms;
        pass &= ok;
        thr.push(m.throughput_eps);
        notes.push(format!(
            "interval {interval}: p99 {:.3} ms = {:.1}x batch period",
            m.p99_ms,
            m.p99_ms / m.mean_batch_period_ms
        ));
    }
    let gain = thr[3] / thr[0];
    pass &= gain >= 1.3;
    verdict(pass, format!("throughput 500 vs 10: {gain:.2}x (need 1.3); {}", notes.join("; ")))
}

fn breakdown() -> Verdict {
    let share = |threads| {
        run(RunConfig {
            skew: Some(0.6),
            ..perf(AppKind::Gs, Scheme::Lock, threads)
        })
        .metrics
        .breakdown
        .sync_share()
    };
    let (one, eight) = (share(1), share(8));
    let tstream_lock: f64 = [1, 8]
        .iter()
        .map(|&t| run(perf(AppKind::Gs, Scheme::TStream, t)).metrics.breakdown.lock_ns)
        .sum();
    verdict(
        eight > one && tstream_lock == 0.0,
        format!(
            "lock sync share 1 thread {:.1}%, 8 threads {:.1}%; tstream lock component {tstream_lock}",
            one * 100.0,
            eight * 100.0
        ),
    )
}

fn determinism() -> Verdict {
    let mut bad = Vec::new();
    for app in APPS {
        let mut w = WorkloadConfig::new(app);
        w.event_count = 20_000;
        let dump = |w: &WorkloadConfig| {
            let mut buf = Vec::new();
            match app {
                AppKind::Gs => dump_trace::<GrepSum>(w, 500, &mut buf),
                AppKind::Sl => dump_trace::<Ledger>(w, 500, &mut buf),
                AppKind::Ob => dump_trace::<Bidding>(w, 500, &mut buf),
                AppKind::Tp => dump_trace::<TollProcessing>(w, 500, &mut buf),
            }
            .unwrap();
            buf
        };
        if dump(&w) != dump(&w) {
            bad.push(format!("{app} stream"));
        }
        for scheme in [Scheme::TStream, Scheme::Lock] {
            let c = RunConfig {
                app,
                scheme,
                threads: 4,
                events: 20_000,
                oracle: Some(false),
                ..RunConfig::default()
            };
            let (a, b) = (run(c.clone()).metrics, run(c).metrics);
            if a.digests != b.digests || a.rejected != b.rejected {
                bad.push(format!("{app}/{scheme}"));
            }
        }
    }
    verdict(bad.is_empty(), format!("4 streams and 8 repeated runs, mismatches {bad:?}"))
}

fn main() {
    let enforce_perf = std::env::var("TXSTREAM_ENFORCE_PERF").is_ok_and(|v| v == "1")
        || std::thread::available_parallelism().map_or(1, |n| n.get()) >= 8;
    let criteria: [(u32, &str, bool, fn() -> Verdict); 10] = [
        (1, "oracle equivalence matrix", true, oracle_matrix),
        (2, "abort atomicity", true, abort_atomicity),
        (3, "version lifecycle", true, version_lifecycle),
        (4, "chain structure properties", true, chain_properties),
        (5, "directional scalability", false, scalability),
        (6, "skew tolerance", false, skew_tolerance),
        (7, "multi-partition sensitivity", false, multi_partition),
        (8, "punctuation interval", false, punctuation_interval),
        (9, "breakdown sanity", false, breakdown),
        (10, "determinism", true, determinism),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut gate_failed = false;
    let mut out = std::io::stdout();
    writeln!(
        out,
        "acceptance: {} hardware threads, performance criteria {}",
        std::thread::available_parallelism().map_or(1, |n| n.get()),
        if enforce_perf { "enforced" } else { "reported only" }
    )
    .unwrap();
    for (id, name, gating, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let enforced = gating || enforce_perf;
        gate_failed |= enforced && !v.pass;
        writeln!(
            out,
            "criterion {id:>2} {}: {name} ({:.0}s){}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            if enforced { "" } else { " [not enforced]" },
            v.detail
        )
        .unwrap();
        out.flush().unwrap();
    }
    if gate_failed {
        std::process::exit(1);
    }
}
