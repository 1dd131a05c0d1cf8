//! Reference serial execution.
//!
//! Runs every event one at a time in timestamp order on plain ordered maps,
//! with no batching, versioning or concurrency. Any scheme that claims
//! serializable, timestamp-ordered results must match it exactly.

use std::collections::BTreeMap;

use crate::api::{FunctionRegistry, OperatorLogic, TxnBuilder};
use crate::model::{BlotterStatus, EventBlotter, EventKind, OpKind, StateRef, Timestamp};
use crate::scheduler::plan_stream;
use crate::store::{digest_rows, Key, StateStore, TableId, Value};
use crate::error::ConfigError;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRecord<O> {
    pub ts: Timestamp,
    pub status: BlotterStatus,
    pub results: Vec<Option<Value>>,
    pub output: O,
}

#[derive(Clone, Debug)]
pub struct SerialOracle {
    tables: Vec<BTreeMap<Key, Value>>,
}

impl SerialOracle {
    /// Starts from the latest values of `store`.
    pub fn from_store(store: &StateStore) -> Self {
        let mut tables = vec![BTreeMap::new(); store.tables().len()];
        for (s, v) in store.snapshot() {
            tables[s.table.0 as usize].insert(s.key, v);
        }
        Self { tables }
    }

    pub fn value(&self, s: StateRef) -> Option<&Value> {
        self.tables.get(s.table.0 as usize)?.get(&s.key)
    }

    fn get(&self, s: StateRef) -> Value {
        self.value(s)
            .unwrap_or_else(|| panic!("serial run touched missing state {s}"))
            .clone()
    }

    fn set(&mut self, s: StateRef, v: Value) {
        self.tables[s.table.0 as usize].insert(s.key, v);
    }

    pub fn digests(&self) -> Vec<u64> {
        self.tables
            .iter()
            .enumerate()
            .map(|(i, t)| digest_rows(TableId(i as u16), t.iter().map(|(k, v)| (*k, v))))
            .collect()
    }

    /// Processes the stream with the same timestamps the engine assigns for
    /// this `interval`.
    pub fn run<L: OperatorLogic>(
        &mut self,
        logic: &L,
        registry: &FunctionRegistry,
        payloads: impl IntoIterator<Item = L::Payload>,
        interval: usize,
    ) -> Result<Vec<OracleRecord<L::Output>>, ConfigError> {
        let mut out = Vec::new();
        for planned in plan_stream(payloads, interval)? {
            let ts = planned.event.ts;
            let EventKind::Data(payload) = planned.event.kind else {
                continue;
            };
            let params = match logic.pre_process(ts, &payload) {
                Ok(p) => p,
                Err(e) => {
                    out.push(OracleRecord {
                        ts,
                        status: BlotterStatus::Rejected,
                        results: Vec::new(),
                        output: logic.failed(&payload, &e),
                    });
                    continue;
                }
            };
            let mut b = TxnBuilder::new(ts, planned.seq, logic.operator_id(&payload));
            let issued = logic.state_access(&params, &mut b).is_ok();
            let txn = b.finish();
            let ok = issued && self.execute(&txn.ops, registry, &txn.shared);
            let mut blotter = EventBlotter::new(ts, params, txn.shared.clone());
            blotter.resolve(if ok {
                BlotterStatus::Committed
            } else {
                BlotterStatus::Rejected
            });
            out.push(OracleRecord {
                ts,
                status: blotter.status(),
                results: blotter.results(),
                output: logic.post_process(&payload, &blotter),
            });
        }
        Ok(out)
    }

    fn execute(
        &mut self,
        ops: &[crate::model::Operation],
        registry: &FunctionRegistry,
        shared: &crate::model::TxnShared,
    ) -> bool {
        let mut undo: Vec<(StateRef, Value)> = Vec::new();
        for op in ops {
            if let Some(c) = &op.cond {
                if !registry.check(c.cfun, &self.get(c.on), &c.args) {
                    for (s, v) in undo.into_iter().rev() {
                        self.set(s, v);
                    }
                    return false;
                }
            }
            let current = self.get(op.target);
            match op.kind {
                OpKind::Read => shared.fill(op.result_slot.unwrap() as usize, current),
                OpKind::Write => {
                    undo.push((op.target, current));
                    self.set(op.target, op.value.clone().unwrap());
                }
                OpKind::ReadModify => {
                    let f = op.fun.as_ref().unwrap();
                    let input = f.source.map_or_else(|| current.clone(), |s| self.get(s));
                    let new = registry.apply(f.fun, &input, &f.args);
                    shared.fill(op.result_slot.unwrap() as usize, current.clone());
                    undo.push((op.target, current));
                    self.set(op.target, new);
                }
            }
        }
        true
    }
}
