//! A scripted operator: each event carries the exact accesses its
//! transaction issues. Lets tests build arbitrary conflict patterns.
#![allow(dead_code)]

use txstream::oracle::SerialOracle;
use txstream::restructure::PlacementPolicy;
use txstream::{
    ApiError, BlotterStatus, Cond, CondId, Engine, EngineConfig, EventBlotter, Fun, FunId,
    FunctionRegistry, OperatorError, OperatorLogic, RunOutput, Scheme, StateStore, TableId,
    Timestamp, TxnBuilder, Value,
};

#[derive(Clone, Debug, PartialEq)]
pub enum Access {
    Read(u64),
    Write(u64, i64),
    /// `key += delta`, or `key = source + delta`, optionally guarded by
    /// `cond.0 >= cond.1`.
    Add {
        key: u64,
        delta: i64,
        cond: Option<(u64, i64)>,
        source: Option<u64>,
    },
}

pub type Script = Vec<Access>;
pub type Reply = (BlotterStatus, Vec<Option<Value>>);

pub struct Scripted {
    pub table: TableId,
}

impl OperatorLogic for Scripted {
    type Payload = Script;
    type Params = Script;
    type Output = Reply;

    fn pre_process(&self, _: Timestamp, s: &Script) -> Result<Script, OperatorError> {
        if s.is_empty() {
            return Err(OperatorError("empty script".into()));
        }
        Ok(s.clone())
    }

    fn state_access(&self, s: &Script, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        let t = self.table;
        for a in s {
            match *a {
                Access::Read(k) => txn.issue_read(t, k)?,
                Access::Write(k, v) => txn.issue_write(t, k, Value::Int(v), None)?,
                Access::Add {
                    key,
                    delta,
                    cond,
                    source,
                } => {
                    let mut f = Fun::new(FunId::ADD, &[delta]);
                    if let Some(src) = source {
                        f = f.from_state(t, src);
                    }
                    let c = cond.map(|(on, min)| Cond::new(CondId::AT_LEAST, &[min], t, on));
                    txn.issue_read_modify(t, key, f, c)?
                }
            }
        }
        Ok(())
    }

    fn post_process(&self, _: &Script, b: &EventBlotter<Script>) -> Reply {
        (b.status(), b.results())
    }

    fn failed(&self, _: &Script, _: &OperatorError) -> Reply {
        (BlotterStatus::Rejected, Vec::new())
    }
}

pub fn store(keys: u64, initial: i64) -> (Scripted, StateStore) {
    let mut store = StateStore::new();
    let table = store.add_table("cells", (0..keys).map(|k| (k, Value::Int(initial))).collect());
    (Scripted { table }, store)
}

pub fn config(scheme: Scheme, executors: usize, interval: usize, shared: bool) -> EngineConfig {
    EngineConfig {
        executors,
        interval,
        scheme,
        placement: if shared {
            PlacementPolicy::shared_everything()
        } else {
            PlacementPolicy::shared_nothing()
        },
        record_results: true,
        ..EngineConfig::default()
    }
}

/// Runs `events` on the engine and on the serial oracle; returns the
/// engine output plus whether records and final tables agree.
pub fn run_both(
    events: &[Script],
    keys: u64,
    initial: i64,
    cfg: EngineConfig,
) -> (RunOutput<Reply>, bool) {
    let interval = cfg.interval;
    let (logic, st) = store(keys, initial);
    let engine = Engine::new(logic, FunctionRegistry::new(), st, cfg).expect("valid config");
    let out = engine.run(events.to_vec()).expect("run completes");

    let (logic, st) = store(keys, initial);
    let mut oracle = SerialOracle::from_store(&st);
    let expected = oracle
        .run(&logic, &FunctionRegistry::new(), events.to_vec(), interval)
        .expect("valid interval");
    let same_records = expected.len() == out.records.len()
        && expected.iter().zip(&out.records).all(|(e, r)| {
            e.ts == r.ts
                && e.status == r.status
                && r.results.as_ref() == Some(&e.results)
                && e.output == r.output
        });
    let same = same_records && oracle.digests() == engine.store().digests();
    (out, same)
}

pub mod props {
    //! Strategies and checks shared by the property suites.

    use std::collections::{BTreeMap, BTreeSet};

    use proptest::prelude::*;
    use proptest::test_runner::TestCaseError;
    use txstream::api::TxnBuilder;
    use txstream::model::OperatorId;
    use txstream::restructure::{build_levels, ChainPool, Placement, PlacementPolicy};
    use txstream::trace::TraceKind;
    use txstream::{OperatorLogic, Scheme, StateTransaction, TableId, Timestamp};

    use super::{run_both, Access, Script, Scripted};

    pub const KEYS: u64 = 8;

    pub fn access() -> impl Strategy<Value = Access> {
        prop_oneof![
            (0..KEYS).prop_map(Access::Read),
            (0..KEYS, -50i64..50).prop_map(|(k, v)| Access::Write(k, v)),
            (
                0..KEYS,
                -40i64..40,
                proptest::option::of((0..KEYS, -20i64..60)),
                proptest::option::weighted(0.3, 0..KEYS),
            )
                .prop_map(|(key, delta, cond, source)| Access::Add {
                    key,
                    delta,
                    cond,
                    source
                }),
        ]
    }

    pub fn scripts() -> impl Strategy<Value = Vec<Script>> {
        proptest::collection::vec(proptest::collection::vec(access(), 1..5), 1..60)
    }

    pub fn placement() -> impl Strategy<Value = PlacementPolicy> {
        prop_oneof![
            Just(PlacementPolicy::shared_nothing()),
            Just(PlacementPolicy::shared_everything()),
            Just(PlacementPolicy::new(Placement::SharedGroup(1))),
        ]
    }

    fn txn_of(script: &Script, ts: u64) -> StateTransaction {
        let logic = Scripted { table: TableId(0) };
        let mut b = TxnBuilder::new(Timestamp(ts), ts, OperatorId(0));
        logic.state_access(script, &mut b).expect("inside state access");
        b.finish()
    }

    /// Chains come out timestamp-sorted, one per state, holding exactly the
    /// issued operations; levels only read states of earlier levels.
    pub fn check_chains(
        events: &[Script],
        workers: usize,
        policy: PlacementPolicy,
    ) -> Result<(), TestCaseError> {
        let pool = ChainPool::new(policy, workers);
        let mut issued = BTreeMap::new();
        // decompose in reverse so sorting is actually exercised
        for (i, s) in events.iter().enumerate().rev() {
            let txn = txn_of(s, i as u64 + 1);
            for op in &txn.ops {
                *issued.entry((op.target, op.ts, op.pos)).or_insert(0) += 1;
            }
            pool.decompose(txn);
        }
        let chains = pool.drain();
        prop_assert!(pool.is_empty());
        let mut seen = BTreeMap::new();
        let mut states = BTreeSet::new();
        for c in &chains {
            prop_assert!(c.is_sorted());
            prop_assert!(states.insert(c.state), "two chains for {}", c.state);
            for op in &c.ops {
                prop_assert_eq!(op.target, c.state);
                *seen.entry((op.target, op.ts, op.pos)).or_insert(0) += 1;
            }
        }
        prop_assert_eq!(&seen, &issued);

        let total: usize = chains.iter().map(|c| c.ops.len()).sum();
        let levels = build_levels(chains);
        prop_assert_eq!(levels.op_count(), total);
        for (k, range) in levels.levels.iter().enumerate() {
            for task in &levels.tasks[range.clone()] {
                prop_assert_eq!(task.level, k);
                for (op, _) in &task.ops {
                    for dep in op.dependencies() {
                        if task.local(dep).is_none() {
                            let (ti, _) = levels.index[&dep];
                            prop_assert!(levels.tasks[ti].level < k);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The engine matches the serial oracle, and the logged trace shows
    /// every foreign read happening after the operations it must observe.
    pub fn check_evaluation(
        events: &[Script],
        executors: usize,
        interval: usize,
        shared: bool,
    ) -> Result<(), TestCaseError> {
        let mut cfg = super::config(Scheme::TStream, executors, interval, shared);
        cfg.trace = true;
        let (out, same) = run_both(events, KEYS, 10, cfg);
        prop_assert!(same, "diverged from the serial oracle");
        for b in &out.batches {
            for r in b.trace.iter().filter(|r| r.kind == TraceKind::DepRead) {
                for w in b.trace.iter().filter(|w| {
                    w.kind != TraceKind::DepRead && w.state == r.state && w.pass == r.pass
                }) {
                    prop_assert!(w.level <= r.level);
                    if w.level < r.level || w.ts < r.ts {
                        prop_assert!(
                            w.order < r.order,
                            "{} read at ts {} before its op at ts {} ran",
                            r.state,
                            r.ts.0,
                            w.ts.0
                        );
                    }
                }
            }
        }
        Ok(())
    }

    /// Two accounts transferring back and forth inside one batch: the
    /// conditions make each chain read the other, a two-state cycle.
    pub fn cycle_events(amounts: &[(bool, i64)]) -> Vec<Script> {
        amounts
            .iter()
            .map(|&(a_to_b, amount)| {
                let (from, to) = if a_to_b { (0, 1) } else { (1, 0) };
                vec![
                    Access::Add { key: to, delta: amount, cond: Some((from, amount)), source: None },
                    Access::Add { key: from, delta: -amount, cond: Some((from, amount)), source: None },
                ]
            })
            .collect()
    }
}
