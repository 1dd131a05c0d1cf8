//! Eager concurrency-control schemes used as comparison points.
//!
//! All of them execute a transaction's operations immediately on the
//! calling executor, in program order. LOCK, MVLK and PAT order
//! conflicting transactions by timestamp; No-Lock does not order anything
//! and only serves as a throughput ceiling.

mod lock;
mod mvlk;
mod nolock;
mod pat;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use parking_lot::{Condvar, Mutex, MutexGuard};
use smallvec::SmallVec;

use crate::api::FunctionRegistry;
use crate::exec::{step, Step};
use crate::metrics::PhaseTimers;
use crate::model::{StateRef, StateTransaction, Timestamp};
use crate::store::{StateStore, Value};

pub use lock::LockScheme;
pub use mvlk::MvlkScheme;
pub use nolock::NoLockScheme;
pub use pat::PatScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Committed,
    Rejected,
}

pub trait EagerScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Runs `txn` to completion. Every data event must pass through here
    /// exactly once, empty transactions included, so admission counters
    /// stay dense.
    fn execute(
        &self,
        txn: &StateTransaction,
        store: &StateStore,
        registry: &FunctionRegistry,
        timers: &mut PhaseTimers,
    ) -> Outcome;

    /// Called when an executor died. Every caller blocked in `execute`
    /// unwinds with [`Halted`] instead of waiting for a transaction that
    /// will never arrive.
    fn halt(&self);
}

/// Unwind payload of executors released by [`EagerScheme::halt`].
#[derive(Debug)]
pub(crate) struct Halted;

#[derive(Debug, Default)]
pub(crate) struct HaltFlag(AtomicBool);

impl HaltFlag {
    pub(crate) fn raise(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    /// Waits on `cv` unless halted. The check happens under the guard, so
    /// a `raise` followed by [`wake`] cannot be missed.
    pub(crate) fn wait<T>(&self, cv: &Condvar, guard: &mut MutexGuard<'_, T>) {
        if self.0.load(Ordering::SeqCst) {
            std::panic::resume_unwind(Box::new(Halted));
        }
        cv.wait(guard);
    }
}

pub(crate) fn wake<T>(lock: &Mutex<T>, cv: &Condvar) {
    drop(lock.lock());
    cv.notify_all();
}

/// Admission counter over the dense transaction sequence.
#[derive(Debug, Default)]
pub(crate) struct PermitCounter {
    next: Mutex<u64>,
    cv: Condvar,
}

impl PermitCounter {
    pub(crate) fn wait_turn(&self, seq: u64, halt: &HaltFlag) {
        let mut next = self.next.lock();
        while *next != seq {
            debug_assert!(*next < seq, "transaction {seq} admitted twice");
            halt.wait(&self.cv, &mut next);
        }
    }

    pub(crate) fn wake(&self) {
        wake(&self.next, &self.cv);
    }

    pub(crate) fn advance(&self) {
        *self.next.lock() += 1;
        self.cv.notify_all();
    }
}

/// States a transaction touches, with whether it writes each one.
pub(crate) fn access_set(txn: &StateTransaction) -> BTreeMap<StateRef, bool> {
    let mut set = BTreeMap::new();
    for op in &txn.ops {
        let w = set.entry(op.target).or_insert(false);
        *w |= op.kind.writes();
        for dep in op.dependencies() {
            set.entry(dep).or_insert(false);
        }
    }
    set
}

type UndoLog = SmallVec<[(StateRef, Option<Timestamp>, Value); 4]>;

fn undo(store: &StateStore, log: UndoLog) {
    for (state, ts, value) in log.into_iter().rev() {
        store
            .record(state)
            .expect("undo of existing state")
            .write()
            .restore(ts, value);
    }
}

/// Executes `txn` in program order against the latest values, in place.
/// Isolation is the caller's job.
pub(crate) fn run_in_place(
    txn: &StateTransaction,
    store: &StateStore,
    registry: &FunctionRegistry,
) -> Outcome {
    let latest = |s: StateRef| {
        store
            .latest(s)
            .unwrap_or_else(|e| panic!("workload touched a missing state: {e}"))
    };
    let mut log = UndoLog::new();
    for op in &txn.ops {
        let cond = op.cond.as_ref().map(|c| latest(c.on));
        let target = op.kind.reads().then(|| latest(op.target));
        let source = op.fun.as_ref().and_then(|f| f.source).map(latest);
        let result = step(op, registry, cond.as_ref(), target.as_ref(), source.as_ref());
        let slot = op.result_slot.map(usize::from);
        let new = match result {
            Step::Fail => {
                undo(store, log);
                return Outcome::Rejected;
            }
            Step::Read(v) => {
                txn.shared.fill(slot.expect("read slot"), v);
                continue;
            }
            Step::Write(new) => new,
            Step::ReadWrite { prior, new } => {
                txn.shared.fill(slot.expect("read-modify slot"), prior);
                new
            }
        };
        let (ts, prev) = store
            .record(op.target)
            .expect("target exists")
            .write()
            .overwrite(op.ts, new);
        log.push((op.target, ts, prev));
    }
    Outcome::Committed
}
