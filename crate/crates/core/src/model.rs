//! Shared vocabulary: timestamps, events, blotters, operations and transactions.

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use smallvec::SmallVec;

use crate::api::{CondId, FunId};
use crate::store::{Key, TableId, Value};

/// Logical sequence number. Data events and punctuations draw from the same
/// dense counter, so no two events of a run ever share one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub u64);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Global fetch-and-add timestamp source.
#[derive(Debug, Default)]
pub struct TimestampAllocator {
    next: AtomicU64,
}

impl TimestampAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the current counter value and bumps it by one.
    ///
    /// Panics if the 64-bit counter would wrap; a run that long is a
    /// configuration error.
    pub fn allocate(&self) -> Timestamp {
        let v = self.next.fetch_add(1, Ordering::Relaxed);
        assert!(v != u64::MAX, "timestamp counter overflow");
        Timestamp(v)
    }

    /// Number of timestamps handed out so far.
    pub fn allocated(&self) -> u64 {
        self.next.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind<P> {
    Data(P),
    Punctuation,
}

/// A timestamped stream element. Punctuations carry no payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Event<P> {
    pub ts: Timestamp,
    pub kind: EventKind<P>,
}

impl<P> Event<P> {
    pub fn data(ts: Timestamp, payload: P) -> Self {
        Self {
            ts,
            kind: EventKind::Data(payload),
        }
    }

    pub fn is_punctuation(&self) -> bool {
        matches!(self.kind, EventKind::Punctuation)
    }
}

/// Builds a punctuation for `ts`. The caller broadcasts a copy to every
/// executor input.
pub fn make_punctuation<P>(ts: Timestamp) -> Event<P> {
    Event {
        ts,
        kind: EventKind::Punctuation,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlotterStatus {
    Pending,
    Committed,
    Rejected,
}

/// Part of a transaction shared between its operations and the owning
/// blotter: result slots plus the per-batch evaluation flags.
///
/// Each result slot is written by exactly one operation, so the per-slot
/// mutexes never contend.
#[derive(Debug)]
pub struct TxnShared {
    ts: Timestamp,
    results: Box<[Mutex<Option<Value>>]>,
    excluded: AtomicBool,
    failed: AtomicBool,
    wrote: AtomicBool,
}

impl TxnShared {
    pub(crate) fn new(ts: Timestamp, slots: usize) -> Self {
        Self {
            ts,
            results: (0..slots).map(|_| Mutex::new(None)).collect(),
            excluded: AtomicBool::new(false),
            failed: AtomicBool::new(false),
            wrote: AtomicBool::new(false),
        }
    }

    pub fn ts(&self) -> Timestamp {
        self.ts
    }

    pub fn slot_count(&self) -> usize {
        self.results.len()
    }

    pub(crate) fn fill(&self, slot: usize, value: Value) {
        *self.results[slot].lock() = Some(value);
    }

    pub fn result(&self, slot: usize) -> Option<Value> {
        self.results.get(slot).and_then(|s| s.lock().clone())
    }

    pub fn results(&self) -> Vec<Option<Value>> {
        self.results.iter().map(|s| s.lock().clone()).collect()
    }

    pub(crate) fn clear_results(&self) {
        for s in self.results.iter() {
            *s.lock() = None;
        }
    }

    /// Marked once the transaction is known to abort; excluded transactions
    /// are skipped by every later evaluation pass.
    pub fn is_excluded(&self) -> bool {
        self.excluded.load(Ordering::Acquire)
    }

    pub(crate) fn exclude(&self) {
        self.excluded.store(true, Ordering::Release);
    }

    pub(crate) fn mark_failed(&self) -> bool {
        !self.failed.swap(true, Ordering::AcqRel)
    }

    pub(crate) fn mark_wrote(&self) {
        self.wrote.store(true, Ordering::Release);
    }

    pub(crate) fn wrote(&self) -> bool {
        self.wrote.load(Ordering::Acquire)
    }

    pub(crate) fn reset_pass(&self) {
        self.failed.store(false, Ordering::Release);
        self.wrote.store(false, Ordering::Release);
    }
}

/// Per-event scratchpad linking compute mode and state-access mode.
#[derive(Debug)]
pub struct EventBlotter<P> {
    pub ts: Timestamp,
    pub params: P,
    shared: Arc<TxnShared>,
    status: BlotterStatus,
}

impl<P> EventBlotter<P> {
    pub(crate) fn new(ts: Timestamp, params: P, shared: Arc<TxnShared>) -> Self {
        Self {
            ts,
            params,
            shared,
            status: BlotterStatus::Pending,
        }
    }

    pub fn status(&self) -> BlotterStatus {
        self.status
    }

    pub fn result(&self, slot: usize) -> Option<Value> {
        self.shared.result(slot)
    }

    pub fn results(&self) -> Vec<Option<Value>> {
        self.shared.results()
    }

    pub fn slot_count(&self) -> usize {
        self.shared.slot_count()
    }

    pub(crate) fn is_excluded(&self) -> bool {
        self.shared.is_excluded()
    }

    /// Settles the blotter. Only a pending blotter can be resolved, and
    /// only once; rejection wipes any partially filled slots.
    pub(crate) fn resolve(&mut self, status: BlotterStatus) {
        assert_eq!(
            self.status,
            BlotterStatus::Pending,
            "blotter {} resolved twice",
            self.ts
        );
        assert_ne!(status, BlotterStatus::Pending);
        if status == BlotterStatus::Rejected {
            self.shared.clear_results();
        }
        self.status = status;
    }
}

/// `(table, key)` coordinate of one state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateRef {
    pub table: TableId,
    pub key: Key,
}

impl StateRef {
    pub fn new(table: TableId, key: Key) -> Self {
        Self { table, key }
    }
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.table.0, self.key)
    }
}

pub type Args = SmallVec<[i64; 3]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Read,
    Write,
    ReadModify,
}

impl OpKind {
    pub fn reads(self) -> bool {
        matches!(self, OpKind::Read | OpKind::ReadModify)
    }

    pub fn writes(self) -> bool {
        matches!(self, OpKind::Write | OpKind::ReadModify)
    }
}

/// Guard evaluated against the visible value of `on` at the operation's
/// timestamp. `own_wrote` is set when an earlier operation of the same
/// transaction wrote `on`.
#[derive(Clone, Debug)]
pub struct Condition {
    pub cfun: CondId,
    pub args: Args,
    pub on: StateRef,
    pub own_wrote: bool,
}

/// Update function applied by a read-modify. `source` is the state whose
/// visible value feeds the function; `None` means the target itself.
#[derive(Clone, Debug)]
pub struct FunCall {
    pub fun: FunId,
    pub args: Args,
    pub source: Option<StateRef>,
    pub source_own_wrote: bool,
}

/// One atomic state access of a transaction, self-contained so it can be
/// shipped to any worker or replayed serially.
#[derive(Clone, Debug)]
pub struct Operation {
    pub ts: Timestamp,
    /// Program-order position inside the transaction.
    pub pos: u16,
    pub target: StateRef,
    pub kind: OpKind,
    pub value: Option<Value>,
    pub fun: Option<FunCall>,
    pub cond: Option<Condition>,
    /// An earlier op of the same transaction wrote `target`.
    pub own_wrote: bool,
    pub result_slot: Option<u16>,
    pub txn: Arc<TxnShared>,
}

impl Operation {
    /// Foreign states this op reads before it can run.
    pub fn dependencies(&self) -> impl Iterator<Item = StateRef> + '_ {
        let cond = self.cond.as_ref().map(|c| c.on);
        let src = self.fun.as_ref().and_then(|f| f.source);
        cond.into_iter()
            .chain(src)
            .filter(move |s| *s != self.target)
    }

    pub fn is_dependency_bearing(&self) -> bool {
        self.dependencies().next().is_some()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OperatorId(pub u32);

/// All operations issued by one `state_access` invocation.
#[derive(Clone, Debug)]
pub struct StateTransaction {
    pub ts: Timestamp,
    /// Dense ordinal among data events, in timestamp order. Lock-based
    /// admission counters step through this sequence.
    pub seq: u64,
    pub ops: Vec<Operation>,
    pub origin: OperatorId,
    pub shared: Arc<TxnShared>,
}

impl StateTransaction {
    pub fn empty(ts: Timestamp, seq: u64, origin: OperatorId) -> Self {
        Self {
            ts,
            seq,
            ops: Vec::new(),
            origin,
            shared: Arc::new(TxnShared::new(ts, 0)),
        }
    }

    pub fn read_slots(&self) -> usize {
        self.ops.iter().filter(|o| o.kind.reads()).count()
    }

    pub fn write_set(&self) -> impl Iterator<Item = StateRef> + '_ {
        self.ops.iter().filter(|o| o.kind.writes()).map(|o| o.target)
    }
}
