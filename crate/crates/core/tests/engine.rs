mod common;

use std::time::Duration;

use common::{run_both, Access, Script, Scripted};
use txstream::restructure::{Placement, PlacementPolicy};
use txstream::scheduler::{ModePhase, Rendezvous};
use txstream::{
    ApiError, BlotterStatus, Engine, EngineConfig, EngineError, EventBlotter, FunctionRegistry,
    OperatorError, OperatorLogic, Scheme, StateStore, Timestamp, TxnBuilder,
};

fn adds(n: usize, keys: u64) -> Vec<Script> {
    (0..n)
        .map(|i| {
            vec![Access::Add {
                key: i as u64 % keys,
                delta: 1,
                cond: None,
                source: None,
            }]
        })
        .collect()
}

/// Wraps the scripted logic with a hook that runs before pre-processing.
struct Hooked<F> {
    inner: Scripted,
    hook: F,
}

impl<F: Fn(&Script) + Send + Sync + 'static> OperatorLogic for Hooked<F> {
    type Payload = Script;
    type Params = Script;
    type Output = common::Reply;

    fn pre_process(&self, ts: Timestamp, s: &Script) -> Result<Script, OperatorError> {
        (self.hook)(s);
        self.inner.pre_process(ts, s)
    }

    fn state_access(&self, s: &Script, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        self.inner.state_access(s, txn)
    }

    fn post_process(&self, s: &Script, b: &EventBlotter<Script>) -> common::Reply {
        self.inner.post_process(s, b)
    }

    fn failed(&self, s: &Script, e: &OperatorError) -> common::Reply {
        self.inner.failed(s, e)
    }
}

fn hooked<F: Fn(&Script) + Send + Sync + 'static>(
    hook: F,
    cfg: EngineConfig,
) -> Engine<Hooked<F>> {
    let (inner, store) = common::store(16, 0);
    Engine::new(Hooked { inner, hook }, FunctionRegistry::new(), store, cfg).unwrap()
}

#[test]
fn batches_wait_for_the_slowest_executor() {
    // event 5 goes to executor 1 (round robin over 3), which then stalls
    let slow = vec![Access::Add { key: 5, delta: 1, cond: None, source: None }];
    let marker = slow.clone();
    let mut events = adds(30, 16);
    events[5] = slow;
    let engine = hooked(
        move |s| {
            if *s == marker {
                std::thread::sleep(Duration::from_millis(50));
            }
        },
        common::config(Scheme::TStream, 3, 10, true),
    );
    let out = engine.run(events).unwrap();
    // three full batches plus the end-of-stream punctuation's empty one
    assert_eq!(out.batches.len(), 4);
    assert_eq!(out.batches[3].transactions, 0);

    for batch in 0..3u64 {
        let log: Vec<_> = out.mode_log.iter().filter(|e| e.batch == batch).collect();
        let last_arrive = log.iter().filter(|e| e.phase == ModePhase::Arrive).map(|e| e.order).max().unwrap();
        let of = |p| log.iter().filter(move |e| e.phase == p);
        assert_eq!(of(ModePhase::Arrive).count(), 3);
        assert_eq!(of(ModePhase::EvalStart).count(), 1);
        assert!(of(ModePhase::EnterStateAccess).all(|e| e.order > last_arrive));
        let eval_end = of(ModePhase::EvalEnd).next().unwrap().order;
        assert!(of(ModePhase::ExitStateAccess).all(|e| e.order > eval_end));
        // every executor has cached its share of the batch on arrival
        assert_eq!(of(ModePhase::Arrive).map(|e| e.cached).sum::<usize>(), 10);
    }
    let digest_ok = run_both(&adds(30, 16), 16, 0, common::config(Scheme::TStream, 3, 10, true)).1;
    assert!(digest_ok);
}

#[test]
fn executor_panic_is_reported_and_nobody_hangs() {
    for scheme in Scheme::ALL {
        for executors in [1, 3] {
            let boom = vec![Access::Read(13)];
            let marker = boom.clone();
            let mut events = adds(40, 8);
            events[17] = boom;
            let engine = hooked(
                move |s| {
                    if *s == marker {
                        panic!("operator blew up");
                    }
                },
                common::config(scheme, executors, 10, false),
            );
            match engine.run(events) {
                Err(EngineError::ExecutorPanic { message, .. }) => {
                    assert!(message.contains("operator blew up"), "{message}")
                }
                other => panic!("{scheme}/{executors}: expected a panic report, got {other:?}"),
            }
        }
    }
}

#[test]
fn failed_pre_processing_rejects_only_that_event() {
    let mut events = adds(20, 4);
    events[7] = Vec::new();
    for scheme in [Scheme::TStream, Scheme::Lock, Scheme::Mvlk, Scheme::Pat] {
        let (out, same) = run_both(&events, 4, 0, common::config(scheme, 2, 6, true));
        assert!(same, "{scheme}");
        assert_eq!(out.rejected(), 1);
        assert_eq!(out.records[7].status, BlotterStatus::Rejected);
        assert_eq!(out.records[7].output, (BlotterStatus::Rejected, Vec::new()));
    }
}

#[test]
fn invalid_configurations_are_refused() {
    let (logic, store) = common::store(4, 0);
    let bad = [
        EngineConfig { executors: 0, ..EngineConfig::default() },
        EngineConfig { interval: 0, ..EngineConfig::default() },
        EngineConfig {
            executors: 4,
            placement: PlacementPolicy::new(Placement::SharedGroup(3)),
            ..EngineConfig::default()
        },
    ];
    for cfg in bad {
        assert!(Engine::new(Scripted { table: logic.table }, FunctionRegistry::new(), store.duplicate(), cfg).is_err());
    }
}

#[test]
fn every_punctuation_closes_a_batch_and_empty_streams_work() {
    let (out, same) = run_both(&[], 4, 0, common::config(Scheme::TStream, 2, 5, true));
    assert!(same);
    assert!(out.records.is_empty());

    let (out, same) = run_both(&adds(23, 4), 4, 0, common::config(Scheme::TStream, 2, 5, true));
    assert!(same);
    assert_eq!(out.ingest.data_events, 23);
    assert_eq!(out.ingest.punctuations, 5);
    assert_eq!(out.batches.len(), 5);
    let ts: Vec<u64> = out.records.iter().map(|r| r.ts.0).collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn rendezvous_poison_releases_waiters() {
    let rv = std::sync::Arc::new(Rendezvous::new(3));
    let waiters: Vec<_> = (0..2)
        .map(|_| {
            let rv = rv.clone();
            std::thread::spawn(move || rv.wait())
        })
        .collect();
    std::thread::sleep(Duration::from_millis(20));
    rv.poison(2);
    for w in waiters {
        assert!(matches!(w.join().unwrap(), Err(EngineError::ExecutorDied(2))));
    }
    assert!(rv.is_poisoned());
}

#[test]
fn identical_runs_are_identical() {
    let events: Vec<Script> = (0..400u64)
        .map(|i| {
            vec![
                Access::Add { key: i % 7, delta: 3, cond: Some(((i + 1) % 7, 2)), source: None },
                Access::Add { key: (i + 1) % 7, delta: -2, cond: Some(((i + 1) % 7, 2)), source: None },
                Access::Read((i * 3) % 7),
            ]
        })
        .collect();
    let run = |executors| {
        let (out, same) = run_both(&events, 7, 1, common::config(Scheme::TStream, executors, 50, false));
        assert!(same);
        out.records.into_iter().map(|r| (r.ts, r.status, r.results)).collect::<Vec<_>>()
    };
    let first = run(1);
    assert_eq!(first, run(1));
    assert_eq!(first, run(3));
    let _ = StateStore::new();
}
