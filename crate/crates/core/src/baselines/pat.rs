//! Partition-level locking.
//!
//! States are split into partitions by key. A transaction queues on every
//! partition it touches, in timestamp order, and runs once it heads all
//! of those queues. Partitions are acquired in ascending id order.

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use parking_lot::{Condvar, Mutex};

use super::{run_in_place, wake, EagerScheme, HaltFlag, Outcome, PermitCounter};
use crate::api::FunctionRegistry;
use crate::error::ConfigError;
use crate::metrics::{since, PhaseTimers};
use crate::model::{StateRef, StateTransaction};
use crate::store::StateStore;

#[derive(Debug, Default)]
struct PartitionQueue {
    queue: Mutex<VecDeque<u64>>,
    cv: Condvar,
}

#[derive(Debug)]
pub struct PatScheme {
    permit: PermitCounter,
    partitions: Vec<PartitionQueue>,
    halt: HaltFlag,
}

impl PatScheme {
    pub fn new(partitions: usize) -> Result<Self, ConfigError> {
        if partitions == 0 {
            return Err(ConfigError::Invalid("partition count must be at least 1".into()));
        }
        Ok(Self {
            permit: PermitCounter::default(),
            partitions: (0..partitions).map(|_| PartitionQueue::default()).collect(),
            halt: HaltFlag::default(),
        })
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    /// Tables are partitioned independently: the same key of two tables
    /// lands in neighbouring partitions.
    pub fn partition_of(&self, state: StateRef) -> usize {
        ((state.key + u64::from(state.table.0)) % self.partitions.len() as u64) as usize
    }

    /// Partitions touched by `txn`, ascending.
    pub fn partitions_of(&self, txn: &StateTransaction) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for op in &txn.ops {
            out.insert(self.partition_of(op.target));
            for d in op.dependencies() {
                out.insert(self.partition_of(d));
            }
        }
        out
    }
}

impl EagerScheme for PatScheme {
    fn name(&self) -> &'static str {
        "PAT"
    }

    fn halt(&self) {
        self.halt.raise();
        self.permit.wake();
        for p in &self.partitions {
            wake(&p.queue, &p.cv);
        }
    }

    fn execute(
        &self,
        txn: &StateTransaction,
        store: &StateStore,
        registry: &FunctionRegistry,
        timers: &mut PhaseTimers,
    ) -> Outcome {
        let parts = self.partitions_of(txn);

        let t = Instant::now();
        self.permit.wait_turn(txn.seq, &self.halt);
        timers.sync_ns += since(t);

        let t = Instant::now();
        for p in &parts {
            self.partitions[*p].queue.lock().push_back(txn.seq);
        }
        self.permit.advance();
        timers.lock_ns += since(t);

        let t = Instant::now();
        for p in &parts {
            let pq = &self.partitions[*p];
            let mut q = pq.queue.lock();
            while q.front() != Some(&txn.seq) {
                self.halt.wait(&pq.cv, &mut q);
            }
        }
        timers.sync_ns += since(t);

        let t = Instant::now();
        let outcome = run_in_place(txn, store, registry);
        timers.useful_ns += since(t);

        for p in &parts {
            let pq = &self.partitions[*p];
            let popped = pq.queue.lock().pop_front();
            debug_assert_eq!(popped, Some(txn.seq));
            pq.cv.notify_all();
        }
        outcome
    }
}
