//! Ordered two-phase locking.
//!
//! Transactions insert their lock requests strictly in timestamp order,
//! gated by a global permit counter, and then wait for grants. Per-key
//! queues grant in FIFO order: a request is granted when everything ahead
//! of it is compatible. Locks are held until the transaction ends.

use rustc_hash::FxHashMap as HashMap;
use std::collections::VecDeque;
use std::time::Instant;

use parking_lot::{Condvar, Mutex};

use super::{access_set, run_in_place, wake, EagerScheme, HaltFlag, Outcome, PermitCounter};
use crate::api::FunctionRegistry;
use crate::metrics::{since, PhaseTimers};
use crate::model::{StateRef, StateTransaction};
use crate::store::StateStore;

#[derive(Debug)]
struct Request {
    seq: u64,
    exclusive: bool,
    released: bool,
}

#[derive(Debug, Default)]
struct KeyLock {
    queue: Mutex<VecDeque<Request>>,
    cv: Condvar,
}

impl KeyLock {
    fn enqueue(&self, seq: u64, exclusive: bool) {
        self.queue.lock().push_back(Request {
            seq,
            exclusive,
            released: false,
        });
    }

    fn granted(queue: &VecDeque<Request>, seq: u64, exclusive: bool) -> bool {
        for r in queue {
            if r.seq == seq {
                return true;
            }
            if !r.released && (r.exclusive || exclusive) {
                return false;
            }
        }
        unreachable!("request {seq} is not queued")
    }

    fn acquire(&self, seq: u64, exclusive: bool, halt: &HaltFlag) {
        let mut q = self.queue.lock();
        while !Self::granted(&q, seq, exclusive) {
            halt.wait(&self.cv, &mut q);
        }
    }

    fn release(&self, seq: u64) {
        let mut q = self.queue.lock();
        if let Some(r) = q.iter_mut().find(|r| r.seq == seq) {
            r.released = true;
        }
        while q.front().is_some_and(|r| r.released) {
            q.pop_front();
        }
        drop(q);
        self.cv.notify_all();
    }
}

/// Lock table over every state of a store.
#[derive(Debug)]
pub(crate) struct LockTable {
    locks: HashMap<StateRef, KeyLock>,
}

impl LockTable {
    pub(crate) fn new(store: &StateStore) -> Self {
        let mut locks = HashMap::with_capacity_and_hasher(store.record_count(), Default::default());
        for t in store.tables() {
            for k in t.keys_sorted() {
                locks.insert(StateRef::new(t.id, k), KeyLock::default());
            }
        }
        Self { locks }
    }

    fn get(&self, s: StateRef) -> &KeyLock {
        self.locks
            .get(&s)
            .unwrap_or_else(|| panic!("no lock for missing state {s}"))
    }
}

#[derive(Debug)]
pub struct LockScheme {
    permit: PermitCounter,
    table: LockTable,
    halt: HaltFlag,
}

impl LockScheme {
    pub fn new(store: &StateStore) -> Self {
        Self {
            permit: PermitCounter::default(),
            table: LockTable::new(store),
            halt: HaltFlag::default(),
        }
    }
}

impl EagerScheme for LockScheme {
    fn name(&self) -> &'static str {
        "LOCK"
    }

    fn halt(&self) {
        self.halt.raise();
        self.permit.wake();
        for l in self.table.locks.values() {
            wake(&l.queue, &l.cv);
        }
    }

    fn execute(
        &self,
        txn: &StateTransaction,
        store: &StateStore,
        registry: &FunctionRegistry,
        timers: &mut PhaseTimers,
    ) -> Outcome {
        let set = access_set(txn);

        let t = Instant::now();
        self.permit.wait_turn(txn.seq, &self.halt);
        timers.sync_ns += since(t);

        let t = Instant::now();
        for (s, w) in &set {
            self.table.get(*s).enqueue(txn.seq, *w);
        }
        self.permit.advance();
        timers.lock_ns += since(t);

        let t = Instant::now();
        for (s, w) in &set {
            self.table.get(*s).acquire(txn.seq, *w, &self.halt);
        }
        timers.sync_ns += since(t);

        let t = Instant::now();
        let outcome = run_in_place(txn, store, registry);
        timers.useful_ns += since(t);

        for s in set.keys() {
            self.table.get(*s).release(txn.seq);
        }
        outcome
    }
}
