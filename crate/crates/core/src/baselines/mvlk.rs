//! Multi-versioned ordered locking.
//!
//! Write sets are registered at admission, in timestamp order. Per key,
//! the low-water mark is the smallest pending writer. A write proceeds
//! only when its transaction is the low-water mark; a read proceeds once
//! no smaller writer is pending and then picks the version visible at its
//! timestamp. Versions no pending reader can see are pruned on commit.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;
use std::time::Instant;

use parking_lot::{Condvar, Mutex, MutexGuard};

use super::{access_set, wake, EagerScheme, HaltFlag, Outcome, PermitCounter};
use crate::api::FunctionRegistry;
use crate::exec::{step, Step};
use crate::metrics::{since, PhaseTimers};
use crate::model::{StateRef, StateTransaction, Timestamp};
use crate::store::{StateStore, Value};

#[derive(Debug, Default)]
struct Pending {
    writers: BTreeSet<Timestamp>,
    readers: BTreeSet<Timestamp>,
}

impl Pending {
    fn lwm(&self) -> Option<Timestamp> {
        self.writers.first().copied()
    }

    fn oldest(&self) -> Timestamp {
        let w = self.writers.first().copied().unwrap_or(Timestamp(u64::MAX));
        let r = self.readers.first().copied().unwrap_or(Timestamp(u64::MAX));
        w.min(r)
    }
}

#[derive(Debug, Default)]
struct KeyState {
    pending: Mutex<Pending>,
    cv: Condvar,
}

impl KeyState {
    fn wait_until(&self, halt: &HaltFlag, ready: impl Fn(&Pending) -> bool) -> MutexGuard<'_, Pending> {
        let mut p = self.pending.lock();
        while !ready(&p) {
            halt.wait(&self.cv, &mut p);
        }
        p
    }
}

#[derive(Debug)]
pub struct MvlkScheme {
    permit: PermitCounter,
    keys: HashMap<StateRef, KeyState>,
    halt: HaltFlag,
}

impl MvlkScheme {
    pub fn new(store: &StateStore) -> Self {
        let mut keys = HashMap::with_capacity_and_hasher(store.record_count(), Default::default());
        for t in store.tables() {
            for k in t.keys_sorted() {
                keys.insert(StateRef::new(t.id, k), KeyState::default());
            }
        }
        Self {
            permit: PermitCounter::default(),
            keys,
            halt: HaltFlag::default(),
        }
    }

    fn key(&self, s: StateRef) -> &KeyState {
        self.keys
            .get(&s)
            .unwrap_or_else(|| panic!("no lock for missing state {s}"))
    }

    fn read(&self, store: &StateStore, s: StateRef, ts: Timestamp, own: bool, waited: &mut u64) -> Value {
        let t = Instant::now();
        let guard = self.key(s).wait_until(&self.halt, |p| p.lwm().is_none_or(|w| w >= ts));
        drop(guard);
        *waited += since(t);
        store
            .record(s)
            .expect("state exists")
            .read()
            .read_visible(ts, own)
            .clone()
    }

    fn finish(&self, store: &StateStore, txn: &StateTransaction, set: &BTreeMap<StateRef, bool>, abort: bool) {
        for (s, w) in set {
            let ks = self.key(*s);
            let mut p = ks.pending.lock();
            if *w {
                p.writers.remove(&txn.ts);
                let mut rec = store.record(*s).expect("state exists").write();
                if abort {
                    rec.remove_version(txn.ts);
                }
                rec.prune_before(p.oldest());
            } else {
                p.readers.remove(&txn.ts);
            }
            drop(p);
            ks.cv.notify_all();
        }
    }
}

impl EagerScheme for MvlkScheme {
    fn name(&self) -> &'static str {
        "MVLK"
    }

    fn halt(&self) {
        self.halt.raise();
        self.permit.wake();
        for k in self.keys.values() {
            wake(&k.pending, &k.cv);
        }
    }

    fn execute(
        &self,
        txn: &StateTransaction,
        store: &StateStore,
        registry: &FunctionRegistry,
        timers: &mut PhaseTimers,
    ) -> Outcome {
        let ts = txn.ts;
        let set = access_set(txn);

        let t = Instant::now();
        self.permit.wait_turn(txn.seq, &self.halt);
        timers.sync_ns += since(t);

        let t = Instant::now();
        for (s, w) in &set {
            let mut p = self.key(*s).pending.lock();
            if *w {
                p.writers.insert(ts);
            } else {
                p.readers.insert(ts);
            }
        }
        self.permit.advance();
        timers.lock_ns += since(t);

        let t = Instant::now();
        let mut waited = 0;
        let mut outcome = Outcome::Committed;
        for op in &txn.ops {
            let cond = op
                .cond
                .as_ref()
                .map(|c| self.read(store, c.on, ts, c.own_wrote, &mut waited));
            let source = op
                .fun
                .as_ref()
                .and_then(|f| f.source.map(|s| (s, f.source_own_wrote)))
                .map(|(s, own)| self.read(store, s, ts, own, &mut waited));
            if !op.kind.writes() {
                let v = self.read(store, op.target, ts, op.own_wrote, &mut waited);
                match step(op, registry, cond.as_ref(), Some(&v), source.as_ref()) {
                    Step::Read(v) => txn.shared.fill(op.result_slot.expect("read slot") as usize, v),
                    Step::Fail => {
                        outcome = Outcome::Rejected;
                        break;
                    }
                    _ => unreachable!(),
                }
                continue;
            }
            let tw = Instant::now();
            let guard = self.key(op.target).wait_until(&self.halt, |p| p.lwm() == Some(ts));
            waited += since(tw);
            let record = store.record(op.target).expect("state exists");
            let mut rec = record.write();
            let prior = op.kind.reads().then(|| rec.read_visible(ts, op.own_wrote).clone());
            match step(op, registry, cond.as_ref(), prior.as_ref(), source.as_ref()) {
                Step::Fail => {
                    outcome = Outcome::Rejected;
                    break;
                }
                Step::Write(new) => {
                    rec.remove_version(ts);
                    rec.push_version(ts, new);
                }
                Step::ReadWrite { prior, new } => {
                    txn.shared.fill(op.result_slot.expect("read-modify slot") as usize, prior);
                    rec.remove_version(ts);
                    rec.push_version(ts, new);
                }
                Step::Read(_) => unreachable!(),
            }
            drop(rec);
            drop(guard);
        }
        let exec = since(t);
        timers.sync_ns += waited;
        timers.useful_ns += exec.saturating_sub(waited);

        self.finish(store, txn, &set, outcome == Outcome::Rejected);
        outcome
    }
}
