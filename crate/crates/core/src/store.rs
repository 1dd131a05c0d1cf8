//! In-memory multi-table state with batch-scoped multiversioning.
//!
//! Between batches every record holds exactly one version. During a batch,
//! records that other operation chains read from accumulate extra versions
//! so late readers still see the value at their timestamp; everything else
//! is updated in place. [`VersionedRecord::gc`] collapses back to a single
//! version once the batch is resolved.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::model::{StateRef, StateTransaction, Timestamp};

pub type Key = u64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TableId(pub u16);

/// Record payloads used by the benchmark applications.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    PriceQty { price: i64, qty: i64 },
    /// Running average stored as `(count, sum)`.
    Avg { count: u64, sum: u64 },
    IdSet(Arc<BTreeSet<u32>>),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn empty_set() -> Self {
        Value::IdSet(Arc::new(BTreeSet::new()))
    }

    /// Approximate in-memory footprint, used for version accounting.
    pub fn approx_size(&self) -> usize {
        match self {
            Value::Int(_) => 8,
            Value::PriceQty { .. } | Value::Avg { .. } => 16,
            Value::IdSet(s) => 16 + 4 * s.len(),
        }
    }

    fn digest_into(&self, h: &mut Fnv) {
        match self {
            Value::Int(v) => {
                h.byte(0);
                h.u64(*v as u64);
            }
            Value::PriceQty { price, qty } => {
                h.byte(1);
                h.u64(*price as u64);
                h.u64(*qty as u64);
            }
            Value::Avg { count, sum } => {
                h.byte(2);
                h.u64(*count);
                h.u64(*sum);
            }
            Value::IdSet(s) => {
                h.byte(3);
                h.u64(s.len() as u64);
                for id in s.iter() {
                    h.u64(u64::from(*id));
                }
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::PriceQty { price, qty } => write!(f, "({price}@{qty})"),
            Value::Avg { count, sum } => write!(f, "avg({sum}/{count})"),
            Value::IdSet(s) => write!(f, "set[{}]", s.len()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("key {0} not found")]
    KeyNotFound(StateRef),
    #[error("unknown table {0:?}")]
    UnknownTable(TableId),
    #[error("write at ts {attempted} after a batch write at ts {applied} on {state}")]
    OrderViolation {
        state: StateRef,
        applied: Timestamp,
        attempted: Timestamp,
    },
    #[error("cannot undo in-place write at ts {0}: later batch writes depend on it")]
    UnrecoverableRollback(Timestamp),
}

/// Image captured on the first batch write, used to restore or roll back.
#[derive(Clone, Debug, PartialEq, Eq)]
struct PreBatchImage {
    ts: Option<Timestamp>,
    value: Value,
}

/// A batch version, stamped with its writer's timestamp and the position
/// of the writing operation inside that transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Version {
    pub ts: Timestamp,
    pub pos: u16,
    pub value: Value,
}

/// One state cell. `committed_ts == None` marks the populated initial value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VersionedRecord {
    pub key: Key,
    committed_ts: Option<Timestamp>,
    committed: Value,
    extra: Vec<Version>,
    pre_batch: Option<PreBatchImage>,
    batch_writes: u32,
}

impl VersionedRecord {
    pub fn new(key: Key, value: Value) -> Self {
        Self {
            key,
            committed_ts: None,
            committed: value,
            extra: Vec::new(),
            pre_batch: None,
            batch_writes: 0,
        }
    }

    pub fn committed(&self) -> (Option<Timestamp>, &Value) {
        (self.committed_ts, &self.committed)
    }

    /// Newest value regardless of timestamp.
    pub fn latest(&self) -> &Value {
        self.extra.last().map(|v| &v.value).unwrap_or(&self.committed)
    }

    pub fn extra_versions(&self) -> &[Version] {
        &self.extra
    }

    pub fn version_count(&self) -> usize {
        1 + self.extra.len()
    }

    pub fn has_pre_batch_image(&self) -> bool {
        self.pre_batch.is_some()
    }

    pub fn pre_batch_value(&self) -> Option<&Value> {
        self.pre_batch.as_ref().map(|p| &p.value)
    }

    /// Value written by the newest version with `write_ts < ts`, or
    /// `write_ts <= ts` when the reading transaction itself wrote the record.
    pub fn read_visible(&self, ts: Timestamp, own_txn_wrote: bool) -> &Value {
        let visible = |w: Timestamp| if own_txn_wrote { w <= ts } else { w < ts };
        self.extra
            .iter()
            .rev()
            .find(|v| visible(v.ts))
            .map(|v| &v.value)
            .unwrap_or(&self.committed)
    }

    /// Value as seen by operation `pos` of the transaction at `ts`: the
    /// newest version written strictly before it in serial order.
    pub fn read_before(&self, ts: Timestamp, pos: u16) -> &Value {
        self.extra
            .iter()
            .rev()
            .find(|v| (v.ts, v.pos) < (ts, pos))
            .map(|v| &v.value)
            .unwrap_or(&self.committed)
    }

    fn last_batch_ts(&self) -> Option<Timestamp> {
        match self.extra.last() {
            Some(v) => Some(v.ts),
            None if self.pre_batch.is_some() => self.committed_ts,
            None => None,
        }
    }

    /// Applies a batch write of operation `pos` of the transaction at `ts`.
    /// Writes must arrive in non-decreasing timestamp order.
    pub fn apply_write(
        &mut self,
        table: TableId,
        ts: Timestamp,
        pos: u16,
        value: Value,
        multiversion: bool,
    ) -> Result<(), StoreError> {
        if let Some(applied) = self.last_batch_ts() {
            if applied > ts {
                return Err(StoreError::OrderViolation {
                    state: StateRef::new(table, self.key),
                    applied,
                    attempted: ts,
                });
            }
        }
        if self.pre_batch.is_none() {
            self.pre_batch = Some(PreBatchImage {
                ts: self.committed_ts,
                value: self.committed.clone(),
            });
        }
        self.batch_writes += 1;
        if multiversion {
            self.extra.push(Version { ts, pos, value });
        } else {
            debug_assert!(self.extra.is_empty(), "mixed in-place and versioned writes");
            self.committed_ts = Some(ts);
            self.committed = value;
        }
        Ok(())
    }

    /// Removes the writes of the transaction at `ts` from this record.
    pub fn rollback(&mut self, ts: Timestamp) -> Result<(), StoreError> {
        let before = self.extra.len();
        self.extra.retain(|v| v.ts != ts);
        if self.extra.len() != before {
            self.batch_writes -= (before - self.extra.len()) as u32;
            return Ok(());
        }
        if self.committed_ts == Some(ts) {
            if let Some(pre) = &self.pre_batch {
                if self.batch_writes != 1 {
                    return Err(StoreError::UnrecoverableRollback(ts));
                }
                self.committed_ts = pre.ts;
                self.committed = pre.value.clone();
                self.batch_writes = 0;
            }
        }
        Ok(())
    }

    /// Drops every write of the current batch.
    pub fn restore_pre_batch(&mut self) {
        self.extra.clear();
        if let Some(pre) = self.pre_batch.take() {
            self.committed_ts = pre.ts;
            self.committed = pre.value;
        }
        self.batch_writes = 0;
    }

    /// Keeps only the newest version and forgets the pre-batch image.
    pub fn gc(&mut self) {
        if let Some(v) = self.extra.pop() {
            self.committed_ts = Some(v.ts);
            self.committed = v.value;
        }
        self.extra.clear();
        self.pre_batch = None;
        self.batch_writes = 0;
    }

    /// Unbatched in-place update used by the eager schemes. Returns the
    /// previous `(ts, value)` for undo logging.
    pub fn overwrite(&mut self, ts: Timestamp, value: Value) -> (Option<Timestamp>, Value) {
        let prev_ts = self.committed_ts.replace(ts);
        let prev = std::mem::replace(&mut self.committed, value);
        (prev_ts, prev)
    }

    pub fn restore(&mut self, ts: Option<Timestamp>, value: Value) {
        self.committed_ts = ts;
        self.committed = value;
    }

    /// Appends a version outside of batch bookkeeping (multiversion locking).
    pub(crate) fn push_version(&mut self, ts: Timestamp, value: Value) {
        debug_assert!(self.extra.last().is_none_or(|v| v.ts < ts));
        self.extra.push(Version { ts, pos: 0, value });
    }

    pub(crate) fn remove_version(&mut self, ts: Timestamp) {
        self.extra.retain(|v| v.ts != ts);
    }

    /// Drops versions that no reader at or after `oldest_reader` can see.
    pub(crate) fn prune_before(&mut self, oldest_reader: Timestamp) {
        let keep_from = self
            .extra
            .iter()
            .rposition(|v| v.ts < oldest_reader);
        if let Some(idx) = keep_from {
            let v = self.extra[idx].clone();
            self.committed_ts = Some(v.ts);
            self.committed = v.value;
            self.extra.drain(..=idx);
        }
    }
}

/// One application table. Keys are fixed at population time.
#[derive(Debug)]
pub struct Table {
    pub id: TableId,
    pub name: String,
    index: HashMap<Key, usize>,
    records: Vec<RwLock<VersionedRecord>>,
}

impl Table {
    fn new(id: TableId, name: &str, rows: Vec<(Key, Value)>) -> Self {
        let mut index = HashMap::with_capacity_and_hasher(rows.len(), Default::default());
        let mut records = Vec::with_capacity(rows.len());
        for (key, value) in rows {
            let slot = records.len();
            if index.insert(key, slot).is_some() {
                panic!("duplicate key {key} while populating table {name}");
            }
            records.push(RwLock::new(VersionedRecord::new(key, value)));
        }
        Self {
            id,
            name: name.to_string(),
            index,
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, key: Key) -> Option<&RwLock<VersionedRecord>> {
        self.index.get(&key).map(|&i| &self.records[i])
    }

    pub fn keys_sorted(&self) -> Vec<Key> {
        let mut keys: Vec<Key> = self.index.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    /// FNV-1a fold over `(key, value)` pairs in ascending key order.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.u64(u64::from(self.id.0));
        for key in self.keys_sorted() {
            let rec = self.records[self.index[&key]].read();
            h.u64(key);
            rec.latest().digest_into(&mut h);
        }
        h.finish()
    }
}

/// All tables of one engine instance.
#[derive(Debug, Default)]
pub struct StateStore {
    tables: Vec<Table>,
}

impl StateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table(&mut self, name: &str, rows: Vec<(Key, Value)>) -> TableId {
        let id = TableId(self.tables.len() as u16);
        self.tables.push(Table::new(id, name, rows));
        id
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, id: TableId) -> Result<&Table, StoreError> {
        self.tables
            .get(id.0 as usize)
            .ok_or(StoreError::UnknownTable(id))
    }

    pub fn record(&self, state: StateRef) -> Result<&RwLock<VersionedRecord>, StoreError> {
        self.table(state.table)?
            .record(state.key)
            .ok_or(StoreError::KeyNotFound(state))
    }

    pub fn read_visible(
        &self,
        table: TableId,
        key: Key,
        ts: Timestamp,
        own_txn_wrote: bool,
    ) -> Result<Value, StoreError> {
        let rec = self.record(StateRef::new(table, key))?.read();
        Ok(rec.read_visible(ts, own_txn_wrote).clone())
    }

    pub fn apply_write(
        &self,
        table: TableId,
        key: Key,
        ts: Timestamp,
        pos: u16,
        value: Value,
        multiversion: bool,
    ) -> Result<(), StoreError> {
        self.record(StateRef::new(table, key))?
            .write()
            .apply_write(table, ts, pos, value, multiversion)
    }

    /// Undoes every applied write of an aborted transaction.
    pub fn rollback_writes(&self, txn: &StateTransaction) -> Result<(), StoreError> {
        let mut seen: Vec<StateRef> = Vec::new();
        for state in txn.write_set() {
            if seen.contains(&state) {
                continue;
            }
            seen.push(state);
            self.record(state)?.write().rollback(txn.ts)?;
        }
        Ok(())
    }

    /// Collapses every record to its newest version.
    pub fn gc_batch(&self) {
        for table in &self.tables {
            for rec in &table.records {
                rec.write().gc();
            }
        }
    }

    pub fn latest(&self, state: StateRef) -> Result<Value, StoreError> {
        Ok(self.record(state)?.read().latest().clone())
    }

    /// Moves a record out, leaving a placeholder. Used to hand exclusive
    /// ownership of a state to its operation chain for one batch.
    pub fn take_record(&self, state: StateRef) -> Result<VersionedRecord, StoreError> {
        let mut slot = self.record(state)?.write();
        let placeholder = VersionedRecord::new(slot.key, Value::Int(0));
        Ok(std::mem::replace(&mut *slot, placeholder))
    }

    pub fn put_record(&self, state: StateRef, record: VersionedRecord) -> Result<(), StoreError> {
        *self.record(state)?.write() = record;
        Ok(())
    }

    pub fn total_versions(&self) -> usize {
        self.tables
            .iter()
            .flat_map(|t| t.records.iter())
            .map(|r| r.read().version_count())
            .sum()
    }

    pub fn record_count(&self) -> usize {
        self.tables.iter().map(Table::len).sum()
    }

    /// Per-table digests in table id order.
    pub fn digests(&self) -> Vec<u64> {
        self.tables.iter().map(Table::digest).collect()
    }

    /// Latest value of every state, for oracle comparison.
    pub fn snapshot(&self) -> Vec<(StateRef, Value)> {
        let mut out = Vec::with_capacity(self.record_count());
        for table in &self.tables {
            for key in table.keys_sorted() {
                let rec = table.record(key).expect("indexed key").read();
                out.push((StateRef::new(table.id, key), rec.latest().clone()));
            }
        }
        out
    }

    /// Deep copy with every record collapsed to its latest value.
    pub fn duplicate(&self) -> StateStore {
        let mut copy = StateStore::new();
        for table in &self.tables {
            let rows = table
                .keys_sorted()
                .into_iter()
                .map(|k| (k, table.record(k).unwrap().read().latest().clone()))
                .collect();
            copy.add_table(&table.name, rows);
        }
        copy
    }
}

/// Digest of an ordered `(state, value)` listing; matches
/// [`Table::digest`] for a snapshot of a single table.
pub fn digest_rows<'a>(table: TableId, rows: impl IntoIterator<Item = (Key, &'a Value)>) -> u64 {
    let mut h = Fnv::new();
    h.u64(u64::from(table.0));
    for (key, value) in rows {
        h.u64(key);
        value.digest_into(&mut h);
    }
    h.finish()
}

pub(crate) struct Fnv(u64);

impl Fnv {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub(crate) fn new() -> Self {
        Fnv(Self::OFFSET)
    }

    pub(crate) fn byte(&mut self, b: u8) {
        self.0 ^= u64::from(b);
        self.0 = self.0.wrapping_mul(Self::PRIME);
    }

    pub(crate) fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.byte(b);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: TableId = TableId(0);

    fn ts(v: u64) -> Timestamp {
        Timestamp(v)
    }

    fn two_versions() -> VersionedRecord {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.apply_write(T, ts(2), 0, Value::Int(10), true).unwrap();
        r.apply_write(T, ts(5), 0, Value::Int(20), true).unwrap();
        r
    }

    #[test]
    fn single_version_visible_everywhere() {
        let r = VersionedRecord::new(1, Value::Int(10));
        for t in [0, 3, 1_000] {
            assert_eq!(r.read_visible(ts(t), false), &Value::Int(10));
        }
    }

    #[test]
    fn visibility_picks_largest_smaller_ts() {
        let r = two_versions();
        assert_eq!(r.read_visible(ts(4), false), &Value::Int(10));
        assert_eq!(r.read_visible(ts(6), false), &Value::Int(20));
        assert_eq!(r.read_visible(ts(5), false), &Value::Int(10));
        assert_eq!(r.read_visible(ts(5), true), &Value::Int(20));
        assert_eq!(r.read_visible(ts(2), false), &Value::Int(0));
    }

    #[test]
    fn in_place_write_saves_pre_batch_image() {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.apply_write(T, ts(3), 0, Value::Int(7), false).unwrap();
        assert_eq!(r.committed(), (Some(ts(3)), &Value::Int(7)));
        assert_eq!(r.pre_batch_value(), Some(&Value::Int(0)));
        assert!(r.extra_versions().is_empty());
    }

    #[test]
    fn versioned_writes_append_in_order() {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.apply_write(T, ts(3), 0, Value::Int(7), true).unwrap();
        r.apply_write(T, ts(8), 0, Value::Int(9), true).unwrap();
        let stamps: Vec<_> = r.extra_versions().iter().map(|v| (v.ts, v.value.clone())).collect();
        assert_eq!(stamps, [(ts(3), Value::Int(7)), (ts(8), Value::Int(9))]);
    }

    #[test]
    fn read_before_sees_only_earlier_operations_of_own_transaction() {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.apply_write(T, ts(4), 0, Value::Int(1), true).unwrap();
        r.apply_write(T, ts(4), 2, Value::Int(2), true).unwrap();
        assert_eq!(r.read_before(ts(4), 0), &Value::Int(0));
        assert_eq!(r.read_before(ts(4), 1), &Value::Int(1));
        assert_eq!(r.read_before(ts(4), 3), &Value::Int(2));
        assert_eq!(r.read_before(ts(5), 0), &Value::Int(2));
        r.gc();
        assert_eq!(r.committed(), (Some(ts(4)), &Value::Int(2)));
    }

    #[test]
    fn out_of_order_write_is_rejected() {
        for mv in [true, false] {
            let mut r = VersionedRecord::new(1, Value::Int(0));
            r.apply_write(T, ts(8), 0, Value::Int(1), mv).unwrap();
            let err = r.apply_write(T, ts(3), 0, Value::Int(2), mv).unwrap_err();
            assert!(matches!(err, StoreError::OrderViolation { .. }), "{err}");
        }
    }

    #[test]
    fn gc_keeps_latest() {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.apply_write(T, ts(3), 0, Value::Int(7), true).unwrap();
        r.apply_write(T, ts(8), 0, Value::Int(9), true).unwrap();
        r.gc();
        assert_eq!(r.committed(), (Some(ts(8)), &Value::Int(9)));
        assert!(r.extra_versions().is_empty());
        assert!(!r.has_pre_batch_image());
        assert_eq!(r.version_count(), 1);

        let mut untouched = VersionedRecord::new(2, Value::Int(4));
        let before = untouched.clone();
        untouched.gc();
        assert_eq!(untouched, before);
    }

    #[test]
    fn rollback_single_in_place_write() {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.apply_write(T, ts(4), 0, Value::Int(7), false).unwrap();
        r.rollback(ts(4)).unwrap();
        assert_eq!(r.committed(), (None, &Value::Int(0)));
    }

    #[test]
    fn rollback_removes_only_own_version() {
        let mut r = two_versions();
        r.rollback(ts(2)).unwrap();
        assert_eq!(r.extra_versions().len(), 1);
        assert_eq!(r.extra_versions()[0].ts, ts(5));
        // no write at this ts: no-op
        r.rollback(ts(77)).unwrap();
        assert_eq!(r.extra_versions().len(), 1);
    }

    #[test]
    fn restore_pre_batch_discards_batch() {
        let mut r = VersionedRecord::new(1, Value::Int(1));
        r.apply_write(T, ts(2), 0, Value::Int(5), false).unwrap();
        r.apply_write(T, ts(3), 0, Value::Int(6), false).unwrap();
        r.restore_pre_batch();
        assert_eq!(r, VersionedRecord::new(1, Value::Int(1)));
    }

    #[test]
    fn store_rollback_and_errors() {
        let mut store = StateStore::new();
        let t = store.add_table("accounts", (0..4).map(|k| (k, Value::Int(100))).collect());
        assert_eq!(
            store.read_visible(t, 9, ts(1), false),
            Err(StoreError::KeyNotFound(StateRef::new(t, 9)))
        );
        store.apply_write(t, 1, ts(5), 0, Value::Int(50), false).unwrap();
        assert_eq!(store.latest(StateRef::new(t, 1)).unwrap(), Value::Int(50));
        store.gc_batch();
        assert_eq!(store.total_versions(), 4);
    }

    #[test]
    fn digest_matches_row_digest() {
        let mut store = StateStore::new();
        let rows: Vec<_> = (0..10).map(|k| (k, Value::Int(k as i64 * 3))).collect();
        let t = store.add_table("grep", rows.clone());
        let expect = digest_rows(t, rows.iter().map(|(k, v)| (*k, v)));
        assert_eq!(store.digests(), vec![expect]);
        store.apply_write(t, 3, ts(1), 0, Value::Int(-1), false).unwrap();
        assert_ne!(store.digests(), vec![expect]);
    }

    #[test]
    fn prune_keeps_reader_visible_version() {
        let mut r = VersionedRecord::new(1, Value::Int(0));
        r.push_version(ts(2), Value::Int(1));
        r.push_version(ts(5), Value::Int(2));
        r.push_version(ts(9), Value::Int(3));
        r.prune_before(ts(6));
        assert_eq!(r.committed(), (Some(ts(5)), &Value::Int(2)));
        assert_eq!(r.extra_versions().len(), 1);
        assert_eq!(r.extra_versions()[0].value, Value::Int(3));
        assert_eq!(r.read_visible(ts(6), false), &Value::Int(2));
    }
}
