//! Operation chains and their concurrent construction.
//!
//! While in compute mode, executors decompose each postponed transaction
//! and append its operations to the chain of the state each one targets.
//! Chains live in lock-striped hash shards, grouped by placement queue, so
//! concurrent executors rarely touch the same lock. The leader drains the
//! pool once all executors have reached the batch rendezvous; draining
//! sorts every chain by `(ts, position)`, so chain order never depends on
//! which executor inserted what.

use parking_lot::Mutex;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::model::{Operation, StateRef, StateTransaction};
use crate::restructure::placement::{placement_hash, PlacementPolicy};

const SHARDS_PER_QUEUE: usize = 16;

#[derive(Default)]
struct ChainSlot {
    ops: Vec<Operation>,
    deps: SmallVec<[StateRef; 2]>,
    dep_source: bool,
}

/// Per-state, timestamp-ordered operations of one batch.
#[derive(Clone, Debug)]
pub struct OperationChain {
    pub state: StateRef,
    pub ops: Vec<Operation>,
    /// Foreign states read by this chain's operations.
    pub dep_targets: Vec<StateRef>,
    /// Some other chain reads this state.
    pub is_dependency_source: bool,
    /// Pool (task queue) the chain was inserted into.
    pub pool: usize,
}

impl OperationChain {
    pub fn new(state: StateRef) -> Self {
        Self {
            state,
            ops: Vec::new(),
            dep_targets: Vec::new(),
            is_dependency_source: false,
            pool: 0,
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.ops
            .windows(2)
            .all(|w| (w[0].ts, w[0].pos) < (w[1].ts, w[1].pos))
    }
}

/// Concurrent chain pools, one per placement queue.
pub struct ChainPool {
    policy: PlacementPolicy,
    workers: usize,
    queues: usize,
    shards: Vec<Mutex<FxHashMap<StateRef, ChainSlot>>>,
}

impl ChainPool {
    pub fn new(policy: PlacementPolicy, workers: usize) -> Self {
        let queues = policy.queue_count(workers);
        Self {
            policy,
            workers,
            queues,
            shards: (0..queues * SHARDS_PER_QUEUE)
                .map(|_| Mutex::new(FxHashMap::default()))
                .collect(),
        }
    }

    pub fn policy(&self) -> PlacementPolicy {
        self.policy
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn shard(&self, state: StateRef) -> &Mutex<FxHashMap<StateRef, ChainSlot>> {
        let queue = self.policy.queue_of(state, self.workers);
        let mix = placement_hash(state).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 60;
        &self.shards[queue * SHARDS_PER_QUEUE + mix as usize % SHARDS_PER_QUEUE]
    }

    /// Splits `txn` into its operations and appends each to the chain of
    /// the state it targets. Safe to call from many executors at once.
    pub fn decompose(&self, txn: StateTransaction) {
        for op in txn.ops {
            for dep in op.dependencies() {
                self.shard(dep).lock().entry(dep).or_default().dep_source = true;
            }
            let mut shard = self.shard(op.target).lock();
            let slot = shard.entry(op.target).or_default();
            for dep in op.dependencies() {
                if !slot.deps.contains(&dep) {
                    slot.deps.push(dep);
                }
            }
            slot.ops.push(op);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.shards.iter().all(|s| s.lock().is_empty())
    }

    /// Takes every chain out of the pool, leaving it empty for the next
    /// batch. Chains come out ordered by pool, then by state.
    pub fn drain(&self) -> Vec<OperationChain> {
        let mut out = Vec::new();
        for q in 0..self.queues {
            let first = out.len();
            for shard in &self.shards[q * SHARDS_PER_QUEUE..(q + 1) * SHARDS_PER_QUEUE] {
                for (state, mut slot) in shard.lock().drain() {
                    slot.ops.sort_unstable_by_key(|op| (op.ts, op.pos));
                    slot.deps.sort_unstable();
                    out.push(OperationChain {
                        state,
                        ops: slot.ops,
                        dep_targets: slot.deps.into_vec(),
                        is_dependency_source: slot.dep_source,
                        pool: q,
                    });
                }
            }
            out[first..].sort_unstable_by_key(|c| c.state);
        }
        out
    }
}
