//! Parallel evaluation of a batch of operation chains.
//!
//! Levels run one after another with a full barrier in between. Inside a
//! level, each task is walked sequentially by exactly one worker, and the
//! task owns its records outright for the whole batch, so no per-record
//! locking happens.
//!
//! Aborts are resolved to a fixpoint. After a pass, the earliest failing
//! transaction is certainly a true abort: everything before it ran on
//! unpolluted state. Later failures are only trusted while every earlier
//! failing transaction applied no writes. Trusted aborts are excluded, all
//! records are reset to their pre-batch image and the batch runs again.

use rustc_hash::FxHashMap as HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crossbeam::queue::SegQueue;
use parking_lot::Mutex;

use crate::api::FunctionRegistry;
use crate::error::ConfigError;
use crate::exec::{step, Step};
use crate::model::{OpKind, StateRef, Timestamp, TxnShared};
use crate::restructure::chain::ChainPool;
use crate::restructure::levels::{build_levels, DependencyLevels, Task, TaskState};
use crate::restructure::placement::PlacementPolicy;
use crate::store::{StateStore, Value};
use crate::trace::{TraceKind, TraceOutcome, TraceRecord};

/// Static routing of tasks to queues and of workers to queues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub queue_count: usize,
    pub task_queue: Vec<usize>,
    pub worker_queue: Vec<usize>,
}

impl Schedule {
    /// Task indices per queue for one level.
    pub fn level_queues(&self, levels: &DependencyLevels, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.queue_count];
        for t in levels.levels[k].clone() {
            out[self.task_queue[t]].push(t);
        }
        out
    }
}

pub fn assign_work(
    levels: &DependencyLevels,
    policy: PlacementPolicy,
    workers: usize,
) -> Result<Schedule, ConfigError> {
    policy.validate(workers)?;
    Ok(Schedule {
        queue_count: policy.queue_count(workers),
        task_queue: levels
            .tasks
            .iter()
            .map(|t| policy.queue_of(t.states[0].state, workers))
            .collect(),
        worker_queue: (0..workers).map(|w| policy.worker_queue(w, workers)).collect(),
    })
}

pub struct EvalContext<'a> {
    pub registry: &'a FunctionRegistry,
    pub threads: &'a rayon::ThreadPool,
    pub workers: usize,
    pub batch_id: u64,
    pub trace: bool,
}

#[derive(Clone, Debug, Default)]
pub struct BatchResult {
    pub batch_id: u64,
    pub transactions: usize,
    pub ops: usize,
    pub tasks: usize,
    pub levels: usize,
    pub merged_components: usize,
    pub passes: usize,
    /// Aborted transactions, ascending.
    pub aborted: Vec<Timestamp>,
    /// Largest number of extra versions alive at the end of any pass.
    pub peak_versions: usize,
    /// Largest version count of any touched record after garbage collection.
    pub versions_after_gc: usize,
    /// Tasks evaluated per worker, summed over levels and passes.
    pub worker_tasks: Vec<usize>,
    pub useful_ns: u64,
    pub idle_ns: u64,
    pub wall_ns: u64,
    /// Draining, level construction, record hand-over and garbage collection.
    pub overhead_ns: u64,
    pub trace: Vec<TraceRecord>,
}

impl BatchResult {
    pub fn committed(&self) -> usize {
        self.transactions - self.aborted.len()
    }
}

#[derive(Default)]
struct WorkerOutcome {
    worker: usize,
    tasks: usize,
    busy_ns: u64,
    failed: Vec<Arc<TxnShared>>,
    trace: Vec<TraceRecord>,
}

struct TaskRun<'a> {
    registry: &'a FunctionRegistry,
    done: &'a [Task],
    index: &'a HashMap<StateRef, (usize, usize)>,
    trace: Option<(&'a AtomicU64, u64, usize, usize, usize)>,
}

impl TaskRun<'_> {
    fn visible<'s>(
        &'s self,
        states: &'s [TaskState],
        state: StateRef,
        ts: Timestamp,
        pos: u16,
    ) -> &'s Value {
        let rec = match states.iter().position(|s| s.state == state) {
            Some(i) => states[i].record.as_ref(),
            None => {
                let (ti, si) = self.index[&state];
                assert!(ti < self.done.len(), "{state} read before its chain finished");
                self.done[ti].states[si].record.as_ref()
            }
        };
        rec.expect("record attached").read_before(ts, pos)
    }

    fn emit(
        &self,
        out: &mut WorkerOutcome,
        state: StateRef,
        ts: Timestamp,
        kind: TraceKind,
        outcome: TraceOutcome,
    ) {
        if let Some((order, batch, pass, level, worker)) = self.trace {
            out.trace.push(TraceRecord {
                batch,
                pass,
                level,
                worker,
                state,
                ts,
                kind,
                outcome,
                order: order.fetch_add(1, Ordering::Relaxed),
            });
        }
    }

    fn run(&self, task: &mut Task, out: &mut WorkerOutcome) {
        let Task { states, ops, .. } = task;
        for (op, local) in ops.iter() {
            let local = *local as usize;
            let kind = match op.kind {
                OpKind::Read => TraceKind::Read,
                OpKind::Write => TraceKind::Write,
                OpKind::ReadModify => TraceKind::ReadModify,
            };
            if op.txn.is_excluded() {
                self.emit(out, op.target, op.ts, kind, TraceOutcome::Skipped);
                continue;
            }
            let result = {
                let cond = op
                    .cond
                    .as_ref()
                    .map(|c| self.visible(states, c.on, op.ts, op.pos));
                let target = op
                    .kind
                    .reads()
                    .then(|| self.visible(states, op.target, op.ts, op.pos));
                let source = op
                    .fun
                    .as_ref()
                    .and_then(|f| f.source.map(|s| self.visible(states, s, op.ts, op.pos)));
                step(op, self.registry, cond, target, source)
            };
            if self.trace.is_some() {
                for dep in op.dependencies() {
                    self.emit(out, dep, op.ts, TraceKind::DepRead, TraceOutcome::Applied);
                }
            }
            let slot = op.result_slot.map(usize::from);
            let outcome = match result {
                Step::Fail => {
                    if op.txn.mark_failed() {
                        out.failed.push(op.txn.clone());
                    }
                    TraceOutcome::CondFailed
                }
                Step::Read(v) => {
                    op.txn.fill(slot.expect("read slot"), v);
                    TraceOutcome::Applied
                }
                Step::Write(new) => {
                    self.write(states, local, op.ts, op.pos, new);
                    op.txn.mark_wrote();
                    TraceOutcome::Applied
                }
                Step::ReadWrite { prior, new } => {
                    op.txn.fill(slot.expect("read-modify slot"), prior);
                    self.write(states, local, op.ts, op.pos, new);
                    op.txn.mark_wrote();
                    TraceOutcome::Applied
                }
            };
            self.emit(out, op.target, op.ts, kind, outcome);
        }
    }

    fn write(&self, states: &mut [TaskState], local: usize, ts: Timestamp, pos: u16, value: Value) {
        let st = &mut states[local];
        st.record
            .as_mut()
            .expect("record attached")
            .apply_write(st.state.table, ts, pos, value, st.multiversion)
            .expect("chain walk applies writes in timestamp order");
    }
}

fn batch_txns(levels: &DependencyLevels) -> Vec<Arc<TxnShared>> {
    let mut seen: HashMap<Timestamp, Arc<TxnShared>> = HashMap::default();
    for t in &levels.tasks {
        for (op, _) in &t.ops {
            seen.entry(op.ts).or_insert_with(|| op.txn.clone());
        }
    }
    seen.into_values().collect()
}

fn extra_versions(levels: &DependencyLevels) -> usize {
    levels
        .tasks
        .iter()
        .flat_map(|t| t.states.iter())
        .filter_map(|s| s.record.as_ref())
        .map(|r| r.extra_versions().len())
        .sum()
}

/// Evaluates a batch whose tasks already own their records.
pub fn evaluate_batch(
    levels: &mut DependencyLevels,
    schedule: &Schedule,
    ctx: &EvalContext<'_>,
) -> BatchResult {
    let started = Instant::now();
    let txns = batch_txns(levels);
    let mut result = BatchResult {
        batch_id: ctx.batch_id,
        transactions: txns.len(),
        ops: levels.op_count(),
        tasks: levels.tasks.len(),
        levels: levels.level_count(),
        merged_components: levels.merged_components.len(),
        worker_tasks: vec![0; ctx.workers],
        ..Default::default()
    };
    let order = AtomicU64::new(0);
    let index = std::mem::take(&mut levels.index);

    loop {
        result.passes += 1;
        for t in &txns {
            t.reset_pass();
        }
        let mut failed: Vec<Arc<TxnShared>> = Vec::new();
        for k in 0..levels.level_count() {
            let range = levels.levels[k].clone();
            let (done, rest) = levels.tasks.split_at_mut(range.start);
            let current = &mut rest[..range.len()];
            let queues: Vec<SegQueue<&mut Task>> =
                (0..schedule.queue_count).map(|_| SegQueue::new()).collect();
            for (i, task) in current.iter_mut().enumerate() {
                queues[schedule.task_queue[range.start + i]].push(task);
            }
            let outcomes: Mutex<Vec<WorkerOutcome>> = Mutex::new(Vec::new());
            let work = |worker: usize| {
                let run = TaskRun {
                    registry: ctx.registry,
                    done,
                    index: &index,
                    trace: ctx
                        .trace
                        .then_some((&order, ctx.batch_id, result.passes, k, worker)),
                };
                let mut out = WorkerOutcome {
                    worker,
                    ..Default::default()
                };
                let queue = &queues[schedule.worker_queue[worker]];
                let t0 = Instant::now();
                while let Some(task) = queue.pop() {
                    run.run(task, &mut out);
                    out.tasks += 1;
                }
                out.busy_ns = t0.elapsed().as_nanos() as u64;
                outcomes.lock().push(out);
            };
            let level_start = Instant::now();
            let active = (0..ctx.workers)
                .filter(|w| !queues[schedule.worker_queue[*w]].is_empty())
                .count();
            if ctx.workers == 1 || range.len() == 1 || active <= 1 {
                // nothing to parallelize; run on the calling thread
                for w in 0..ctx.workers {
                    if !queues[schedule.worker_queue[w]].is_empty() {
                        work(w);
                    }
                }
            } else {
                ctx.threads.scope(|s| {
                    for w in 0..ctx.workers {
                        let work = &work;
                        s.spawn(move |_| work(w));
                    }
                });
            }
            let level_wall = level_start.elapsed().as_nanos() as u64;
            let mut busy = 0;
            for out in outcomes.into_inner() {
                result.worker_tasks[out.worker] += out.tasks;
                busy += out.busy_ns;
                result.useful_ns += out.busy_ns;
                failed.extend(out.failed);
                result.trace.extend(out.trace);
            }
            let participants = if active <= 1 { 1 } else { ctx.workers as u64 };
            result.idle_ns += (level_wall * participants).saturating_sub(busy);
        }

        result.peak_versions = result.peak_versions.max(extra_versions(levels));
        if failed.is_empty() {
            break;
        }
        failed.sort_by_key(|t| t.ts());
        for t in &failed {
            t.exclude();
            result.aborted.push(t.ts());
            if t.wrote() {
                break;
            }
        }
        for task in &mut levels.tasks {
            for st in &mut task.states {
                st.record.as_mut().expect("record attached").restore_pre_batch();
            }
        }
    }
    result.aborted.sort_unstable();
    levels.index = index;
    result.trace.sort_by_key(|r| r.order);
    result.wall_ns = started.elapsed().as_nanos() as u64;
    result
}

/// Drains `pool`, evaluates the batch against `store` and collapses every
/// touched record back to a single version.
pub fn run_batch(
    pool: &ChainPool,
    store: &StateStore,
    ctx: &EvalContext<'_>,
) -> Result<BatchResult, ConfigError> {
    let t0 = Instant::now();
    let chains = pool.drain();
    let mut levels = build_levels(chains);
    let schedule = assign_work(&levels, pool.policy(), ctx.workers)?;
    for task in &mut levels.tasks {
        for st in &mut task.states {
            st.record = Some(store.take_record(st.state).unwrap_or_else(|e| panic!("{e}")));
        }
    }
    let mut result = evaluate_batch(&mut levels, &schedule, ctx);
    for task in &mut levels.tasks {
        for st in &mut task.states {
            let mut rec = st.record.take().expect("record attached");
            rec.gc();
            result.versions_after_gc = result.versions_after_gc.max(rec.version_count());
            store.put_record(st.state, rec).expect("record came from store");
        }
    }
    result.overhead_ns = (t0.elapsed().as_nanos() as u64).saturating_sub(result.wall_ns);
    Ok(result)
}
