//! Stream ingestion, executors and the mode-switching runtime.
//!
//! A single driver timestamps the input, deals data events round-robin to
//! the executors over bounded queues and broadcasts a punctuation every
//! `interval` data events plus one at end of stream.
//!
//! Under the chain-based scheme each executor runs in compute mode between
//! punctuations: it pre-processes events, decomposes their transactions
//! into the shared chain pool and caches the blotters. On a punctuation
//! all executors meet at a rendezvous, the last one to arrive evaluates
//! the batch with the worker pool, and everybody meets again before
//! resolving its cached events. The eager schemes ignore punctuations and
//! run each transaction as it arrives.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crossbeam::channel::{bounded, Receiver, Sender};
use parking_lot::{Condvar, Mutex};

use crate::api::{FunctionRegistry, OperatorError, OperatorLogic, TxnBuilder};
use crate::baselines::{
    EagerScheme, Halted, LockScheme, MvlkScheme, NoLockScheme, Outcome, PatScheme,
};
use crate::error::{ConfigError, EngineError};
use crate::metrics::{since, PhaseTimers};
use crate::model::{
    make_punctuation, BlotterStatus, Event, EventBlotter, EventKind, StateTransaction, Timestamp,
    TimestampAllocator,
};
use crate::restructure::chain::ChainPool;
use crate::restructure::evaluate::{run_batch, BatchResult, EvalContext};
use crate::restructure::placement::PlacementPolicy;
use crate::store::{StateStore, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    TStream,
    Lock,
    Mvlk,
    Pat,
    NoLock,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::TStream,
        Scheme::Lock,
        Scheme::Mvlk,
        Scheme::Pat,
        Scheme::NoLock,
    ];

    /// Whether results are guaranteed to match a serial execution.
    pub fn is_ordered(self) -> bool {
        self != Scheme::NoLock
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::TStream => "tstream",
            Scheme::Lock => "lock",
            Scheme::Mvlk => "mvlk",
            Scheme::Pat => "pat",
            Scheme::NoLock => "nolock",
        })
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tstream" => Ok(Scheme::TStream),
            "lock" => Ok(Scheme::Lock),
            "mvlk" => Ok(Scheme::Mvlk),
            "pat" => Ok(Scheme::Pat),
            "nolock" | "no-lock" => Ok(Scheme::NoLock),
            other => Err(ConfigError::Invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Reusable barrier that can be poisoned, so a dying party releases
/// everybody else with an error instead of leaving them blocked.
#[derive(Debug)]
pub struct Rendezvous {
    parties: usize,
    state: Mutex<RvState>,
    cv: Condvar,
}

#[derive(Debug, Default)]
struct RvState {
    arrived: usize,
    generation: u64,
    broken: Option<usize>,
}

impl Rendezvous {
    pub fn new(parties: usize) -> Self {
        assert!(parties > 0);
        Self {
            parties,
            state: Mutex::new(RvState::default()),
            cv: Condvar::new(),
        }
    }

    /// Blocks until all parties arrived. The last one to arrive is the
    /// leader and gets `Ok(true)`.
    pub fn wait(&self) -> Result<bool, EngineError> {
        let mut st = self.state.lock();
        if let Some(who) = st.broken {
            return Err(EngineError::ExecutorDied(who));
        }
        st.arrived += 1;
        if st.arrived == self.parties {
            st.arrived = 0;
            st.generation += 1;
            self.cv.notify_all();
            return Ok(true);
        }
        let generation = st.generation;
        while st.generation == generation {
            if let Some(who) = st.broken {
                return Err(EngineError::ExecutorDied(who));
            }
            self.cv.wait(&mut st);
        }
        Ok(false)
    }

    pub fn poison(&self, party: usize) {
        let mut st = self.state.lock();
        st.broken.get_or_insert(party);
        self.cv.notify_all();
    }

    pub fn is_poisoned(&self) -> bool {
        self.state.lock().broken.is_some()
    }
}

/// A timestamped event ready for ingestion. `seq` is the dense data-event
/// ordinal; for a punctuation it is the number of data events before it.
#[derive(Clone, Debug, PartialEq)]
pub struct Planned<P> {
    pub event: Event<P>,
    pub seq: u64,
}

/// Assigns timestamps to a payload stream and interleaves punctuations.
pub struct StreamPlan<I: Iterator> {
    input: I,
    interval: usize,
    clock: TimestampAllocator,
    data: u64,
    since_punct: usize,
    finished: bool,
}

pub fn plan_stream<I: IntoIterator>(
    payloads: I,
    interval: usize,
) -> Result<StreamPlan<I::IntoIter>, ConfigError> {
    if interval < 1 {
        return Err(ConfigError::Invalid("punctuation interval must be at least 1".into()));
    }
    Ok(StreamPlan {
        input: payloads.into_iter(),
        interval,
        clock: TimestampAllocator::new(),
        data: 0,
        since_punct: 0,
        finished: false,
    })
}

impl<I: Iterator> Iterator for StreamPlan<I> {
    type Item = Planned<I::Item>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        if self.since_punct == self.interval {
            self.since_punct = 0;
            return Some(Planned {
                event: make_punctuation(self.clock.allocate()),
                seq: self.data,
            });
        }
        match self.input.next() {
            Some(p) => {
                let seq = self.data;
                self.data += 1;
                self.since_punct += 1;
                Some(Planned {
                    event: Event::data(self.clock.allocate(), p),
                    seq,
                })
            }
            None => {
                self.finished = true;
                Some(Planned {
                    event: make_punctuation(self.clock.allocate()),
                    seq: self.data,
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Envelope<P> {
    pub event: Event<P>,
    pub seq: u64,
    pub ingested: Instant,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub data_events: u64,
    pub punctuations: u64,
    pub per_queue: Vec<u64>,
    /// Some executor went away before the stream ended.
    pub disconnected: bool,
}

/// Feeds `payloads` to `queues`: data events round-robin, punctuations to
/// every queue. Returns early if a queue's receiver is gone.
pub fn ingest<P: Clone>(
    payloads: impl IntoIterator<Item = P>,
    queues: &[Sender<Envelope<P>>],
    interval: usize,
) -> Result<IngestSummary, ConfigError> {
    let plan = plan_stream(payloads, interval)?;
    Ok(ingest_plan(plan, queues))
}

pub fn ingest_plan<P: Clone>(
    plan: impl Iterator<Item = Planned<P>>,
    queues: &[Sender<Envelope<P>>],
) -> IngestSummary {
    assert!(!queues.is_empty());
    let mut summary = IngestSummary {
        per_queue: vec![0; queues.len()],
        ..Default::default()
    };
    for Planned { event, seq } in plan {
        let ingested = Instant::now();
        if event.is_punctuation() {
            summary.punctuations += 1;
            for q in queues {
                let env = Envelope {
                    event: event.clone(),
                    seq,
                    ingested,
                };
                if q.send(env).is_err() {
                    summary.disconnected = true;
                    return summary;
                }
            }
        } else {
            let i = (seq % queues.len() as u64) as usize;
            summary.data_events += 1;
            summary.per_queue[i] += 1;
            if queues[i].send(Envelope { event, seq, ingested }).is_err() {
                summary.disconnected = true;
                return summary;
            }
        }
    }
    summary
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub executors: usize,
    pub interval: usize,
    pub scheme: Scheme,
    pub placement: PlacementPolicy,
    /// Partitions for PAT; 0 means one per executor.
    pub partitions: usize,
    /// Keep every event's read results in the sink records.
    pub record_results: bool,
    /// Collect the per-operation evaluation trace.
    pub trace: bool,
    /// Per-executor input queue bound; 0 sizes the queues to hold about
    /// one punctuation interval in total, which keeps queueing delay near
    /// the batch period.
    pub queue_capacity: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            executors: 1,
            interval: 500,
            scheme: Scheme::TStream,
            placement: PlacementPolicy::shared_everything(),
            partitions: 0,
            record_results: false,
            trace: false,
            queue_capacity: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.executors == 0 {
            return Err(ConfigError::Invalid("need at least one executor".into()));
        }
        if self.interval == 0 {
            return Err(ConfigError::Invalid("punctuation interval must be at least 1".into()));
        }
        if self.scheme == Scheme::TStream {
            self.placement.validate(self.executors)?;
        }
        Ok(())
    }

    pub fn queue_bound(&self) -> usize {
        if self.queue_capacity > 0 {
            self.queue_capacity
        } else {
            self.interval.div_ceil(self.executors) + 1
        }
    }

    pub fn partition_count(&self) -> usize {
        if self.partitions == 0 {
            self.executors
        } else {
            self.partitions
        }
    }
}

/// What an executor emits for each data event.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkRecord<O> {
    pub ts: Timestamp,
    pub seq: u64,
    pub executor: usize,
    pub status: BlotterStatus,
    pub output: O,
    pub results: Option<Vec<Option<Value>>>,
    /// Nanoseconds since run start.
    pub ingest_ns: u64,
    pub emit_ns: u64,
}

impl<O> SinkRecord<O> {
    pub fn latency_ns(&self) -> u64 {
        self.emit_ns.saturating_sub(self.ingest_ns)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModePhase {
    /// Arrived at the batch rendezvous.
    Arrive,
    /// Passed it; now in state-access mode.
    EnterStateAccess,
    EvalStart,
    EvalEnd,
    /// Passed the second rendezvous; back in compute mode.
    ExitStateAccess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeEvent {
    pub executor: usize,
    pub batch: u64,
    pub phase: ModePhase,
    /// Events cached by the executor at that point.
    pub cached: usize,
    /// Global order of logging.
    pub order: u64,
}

#[derive(Debug)]
pub struct RunOutput<O> {
    pub scheme: Scheme,
    /// Sink records sorted by timestamp.
    pub records: Vec<SinkRecord<O>>,
    pub batches: Vec<BatchResult>,
    pub timers: PhaseTimers,
    pub per_executor: Vec<PhaseTimers>,
    pub mode_log: Vec<ModeEvent>,
    pub ingest: IngestSummary,
    pub wall: Duration,
}

impl<O> RunOutput<O> {
    pub fn rejected(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == BlotterStatus::Rejected)
            .count()
    }

    pub fn committed(&self) -> usize {
        self.records.len() - self.rejected()
    }
}

enum Runtime {
    TStream {
        pool: ChainPool,
        threads: rayon::ThreadPool,
    },
    Eager(Box<dyn EagerScheme>),
}

struct Shared<'a, L: OperatorLogic> {
    logic: &'a L,
    registry: &'a FunctionRegistry,
    store: &'a StateStore,
    config: &'a EngineConfig,
    runtime: Runtime,
    rendezvous: Rendezvous,
    clock: Instant,
    order: AtomicU64,
    mode_log: Mutex<Vec<ModeEvent>>,
    batches: Mutex<Vec<BatchResult>>,
}

impl<L: OperatorLogic> Shared<'_, L> {
    fn log(&self, executor: usize, batch: u64, phase: ModePhase, cached: usize) {
        let mut log = self.mode_log.lock();
        log.push(ModeEvent {
            executor,
            batch,
            phase,
            cached,
            order: self.order.fetch_add(1, Ordering::Relaxed),
        });
    }

    fn now_ns(&self) -> u64 {
        self.clock.elapsed().as_nanos() as u64
    }

    fn emit(
        &self,
        id: usize,
        env_ts: Timestamp,
        seq: u64,
        ingested: Instant,
        payload: &L::Payload,
        blotter: &EventBlotter<L::Params>,
    ) -> SinkRecord<L::Output> {
        let output = self.logic.post_process(payload, blotter);
        SinkRecord {
            ts: env_ts,
            seq,
            executor: id,
            status: blotter.status(),
            output,
            results: self.config.record_results.then(|| blotter.results()),
            ingest_ns: ingested.duration_since(self.clock).as_nanos() as u64,
            emit_ns: self.now_ns(),
        }
    }

    fn emit_failed(
        &self,
        id: usize,
        ts: Timestamp,
        seq: u64,
        ingested: Instant,
        payload: &L::Payload,
        error: &OperatorError,
    ) -> SinkRecord<L::Output> {
        SinkRecord {
            ts,
            seq,
            executor: id,
            status: BlotterStatus::Rejected,
            output: self.logic.failed(payload, error),
            results: self.config.record_results.then(Vec::new),
            ingest_ns: ingested.duration_since(self.clock).as_nanos() as u64,
            emit_ns: self.now_ns(),
        }
    }
}

/// Releases every other executor if this one unwinds.
struct PoisonOnPanic<'a>(&'a Rendezvous, &'a Runtime, usize);

impl Drop for PoisonOnPanic<'_> {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.0.poison(self.2);
            if let Runtime::Eager(scheme) = self.1 {
                scheme.halt();
            }
        }
    }
}

struct Cached<L: OperatorLogic> {
    payload: L::Payload,
    seq: u64,
    ingested: Instant,
    blotter: EventBlotter<L::Params>,
}

struct ExecutorReport<O> {
    records: Vec<SinkRecord<O>>,
    timers: PhaseTimers,
}

fn run_executor<L: OperatorLogic>(
    id: usize,
    rx: Receiver<Envelope<L::Payload>>,
    shared: &Shared<'_, L>,
) -> Result<ExecutorReport<L::Output>, EngineError> {
    let _guard = PoisonOnPanic(&shared.rendezvous, &shared.runtime, id);
    let mut records = Vec::new();
    let mut timers = PhaseTimers::default();
    let mut cache: Vec<Cached<L>> = Vec::new();
    let mut batch = 0u64;

    for env in rx.iter() {
        let Envelope {
            event,
            seq,
            ingested,
        } = env;
        let ts = event.ts;
        match event.kind {
            EventKind::Punctuation => {
                let Runtime::TStream { pool, threads } = &shared.runtime else {
                    continue;
                };
                shared.log(id, batch, ModePhase::Arrive, cache.len());
                let t = Instant::now();
                let leader = shared.rendezvous.wait()?;
                let waited = since(t);
                timers.sync_ns += waited;
                timers.total_ns += waited;
                shared.log(id, batch, ModePhase::EnterStateAccess, cache.len());
                if leader {
                    shared.log(id, batch, ModePhase::EvalStart, cache.len());
                    let ctx = EvalContext {
                        registry: shared.registry,
                        threads,
                        workers: shared.config.executors,
                        batch_id: batch,
                        trace: shared.config.trace,
                    };
                    let res = match run_batch(pool, shared.store, &ctx) {
                        Ok(r) => r,
                        Err(e) => {
                            shared.rendezvous.poison(id);
                            return Err(e.into());
                        }
                    };
                    timers.useful_ns += res.useful_ns;
                    timers.sync_ns += res.idle_ns;
                    timers.total_ns += res.useful_ns + res.idle_ns + res.overhead_ns;
                    shared.log(id, batch, ModePhase::EvalEnd, cache.len());
                    shared.batches.lock().push(res);
                }
                shared.rendezvous.wait()?;
                shared.log(id, batch, ModePhase::ExitStateAccess, cache.len());
                for mut c in cache.drain(..) {
                    let status = if c.blotter.is_excluded() {
                        BlotterStatus::Rejected
                    } else {
                        BlotterStatus::Committed
                    };
                    c.blotter.resolve(status);
                    records.push(shared.emit(id, c.blotter.ts, c.seq, c.ingested, &c.payload, &c.blotter));
                }
                batch += 1;
            }
            EventKind::Data(payload) => {
                let origin = shared.logic.operator_id(&payload);
                let params = shared.logic.pre_process(ts, &payload);
                let t = Instant::now();
                let (params, txn, ok) = match params {
                    Ok(params) => {
                        let mut b = TxnBuilder::new(ts, seq, origin);
                        let ok = shared.logic.state_access(&params, &mut b).is_ok();
                        let txn = if ok {
                            b.finish()
                        } else {
                            StateTransaction::empty(ts, seq, origin)
                        };
                        (Ok(params), txn, ok)
                    }
                    Err(e) => (Err(e), StateTransaction::empty(ts, seq, origin), false),
                };
                match &shared.runtime {
                    Runtime::TStream { pool, .. } => {
                        let txn_shared = txn.shared.clone();
                        if ok {
                            pool.decompose(txn);
                        } else {
                            txn_shared.exclude();
                        }
                        timers.total_ns += since(t);
                        timers.txns += 1;
                        match params {
                            Ok(params) => cache.push(Cached {
                                payload,
                                seq,
                                ingested,
                                blotter: EventBlotter::new(ts, params, txn_shared),
                            }),
                            Err(e) => records.push(shared.emit_failed(id, ts, seq, ingested, &payload, &e)),
                        }
                    }
                    Runtime::Eager(scheme) => {
                        let outcome = scheme.execute(&txn, shared.store, shared.registry, &mut timers);
                        timers.total_ns += since(t);
                        timers.txns += 1;
                        let status = match (ok, outcome) {
                            (true, Outcome::Committed) => BlotterStatus::Committed,
                            _ => BlotterStatus::Rejected,
                        };
                        match params {
                            Ok(params) => {
                                let mut blotter = EventBlotter::new(ts, params, txn.shared.clone());
                                blotter.resolve(status);
                                records.push(shared.emit(id, ts, seq, ingested, &payload, &blotter));
                            }
                            Err(e) => records.push(shared.emit_failed(id, ts, seq, ingested, &payload, &e)),
                        }
                    }
                }
            }
        }
    }
    Ok(ExecutorReport { records, timers })
}

/// Runs operator logic over a stream under one concurrency-control scheme.
pub struct Engine<L: OperatorLogic> {
    logic: L,
    registry: FunctionRegistry,
    store: StateStore,
    config: EngineConfig,
}

impl<L: OperatorLogic> Engine<L> {
    pub fn new(
        logic: L,
        registry: FunctionRegistry,
        store: StateStore,
        config: EngineConfig,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            logic,
            registry,
            store,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> &StateStore {
        &self.store
    }

    pub fn into_store(self) -> StateStore {
        self.store
    }

    pub fn logic(&self) -> &L {
        &self.logic
    }

    /// Processes the whole stream and returns once every executor drained
    /// its input. State changes stay in the engine's store.
    pub fn run(
        &self,
        payloads: impl IntoIterator<Item = L::Payload>,
    ) -> Result<RunOutput<L::Output>, EngineError> {
        let config = &self.config;
        let n = config.executors;
        let plan = plan_stream(payloads, config.interval)?;
        let runtime = match config.scheme {
            Scheme::TStream => Runtime::TStream {
                pool: ChainPool::new(config.placement, n),
                threads: rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .thread_name(|i| format!("chain-worker-{i}"))
                    .build()
                    .map_err(|e| ConfigError::Invalid(format!("worker pool: {e}")))?,
            },
            Scheme::Lock => Runtime::Eager(Box::new(LockScheme::new(&self.store))),
            Scheme::Mvlk => Runtime::Eager(Box::new(MvlkScheme::new(&self.store))),
            Scheme::Pat => Runtime::Eager(Box::new(PatScheme::new(config.partition_count())?)),
            Scheme::NoLock => Runtime::Eager(Box::new(NoLockScheme)),
        };
        let shared = Shared {
            logic: &self.logic,
            registry: &self.registry,
            store: &self.store,
            config,
            runtime,
            rendezvous: Rendezvous::new(n),
            clock: Instant::now(),
            order: AtomicU64::new(0),
            mode_log: Mutex::new(Vec::new()),
            batches: Mutex::new(Vec::new()),
        };

        let (summary, joined) = std::thread::scope(|s| {
            let mut senders = Vec::with_capacity(n);
            let mut handles = Vec::with_capacity(n);
            for id in 0..n {
                let (tx, rx) = bounded(config.queue_bound());
                senders.push(tx);
                let shared = &shared;
                handles.push(
                    std::thread::Builder::new()
                        .name(format!("executor-{id}"))
                        .spawn_scoped(s, move || run_executor(id, rx, shared))
                        .expect("spawn executor"),
                );
            }
            let summary = ingest_plan(plan, &senders);
            drop(senders);
            let joined: Vec<_> = handles.into_iter().map(|h| h.join()).collect();
            (summary, joined)
        });

        let mut records = Vec::new();
        let mut per_executor = Vec::with_capacity(n);
        let mut first_err = None;
        for (id, j) in joined.into_iter().enumerate() {
            match j {
                Ok(Ok(rep)) => {
                    records.extend(rep.records);
                    per_executor.push(rep.timers);
                }
                Ok(Err(e)) => {
                    first_err.get_or_insert(e);
                }
                Err(panic) if panic.is::<Halted>() => {
                    first_err.get_or_insert(EngineError::ExecutorDied(id));
                }
                Err(panic) => {
                    let message = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    // a panic is the root cause; prefer it over the
                    // secondary errors of the executors it released
                    first_err = Some(EngineError::ExecutorPanic {
                        executor: id,
                        message,
                    });
                }
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        let wall = shared.clock.elapsed();
        records.sort_by_key(|r| r.ts);
        let mut timers = PhaseTimers::default();
        for t in &per_executor {
            timers.merge(t);
        }
        let mut batches = shared.batches.into_inner();
        batches.sort_by_key(|b| b.batch_id);
        let mut mode_log = shared.mode_log.into_inner();
        mode_log.sort_by_key(|m| m.order);
        Ok(RunOutput {
            scheme: config.scheme,
            records,
            batches,
            timers,
            per_executor,
            mode_log,
            ingest: summary,
            wall,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn plan_places_punctuations() {
        let plan: Vec<_> = plan_stream(0..5, 2).unwrap().collect();
        let kinds: Vec<bool> = plan.iter().map(|p| p.event.is_punctuation()).collect();
        assert_eq!(kinds, vec![false, false, true, false, false, true, false, true]);
        let ts: Vec<u64> = plan.iter().map(|p| p.event.ts.0).collect();
        assert_eq!(ts, (0..8).collect::<Vec<_>>());
        assert_eq!(plan[6].seq, 4);
    }

    #[test]
    fn zero_interval_is_rejected() {
        assert!(plan_stream(0..1, 0).is_err());
    }

    #[test]
    fn round_robin_delivery() {
        let (t0, r0) = bounded(64);
        let (t1, r1) = bounded(64);
        let s = ingest(0..5u32, &[t0, t1], 500).unwrap();
        assert_eq!(s.per_queue, vec![3, 2]);
        assert_eq!(s.punctuations, 1);
        let q0: Vec<_> = r0.try_iter().collect();
        let q1: Vec<_> = r1.try_iter().collect();
        assert_eq!(q0.len(), 4);
        assert_eq!(q1.len(), 3);
        assert!(q0.last().unwrap().event.is_punctuation());
        assert_eq!(q0.last().unwrap().event.ts, q1.last().unwrap().event.ts);
    }

    #[test]
    fn poisoned_rendezvous_releases_waiters() {
        let rv = Arc::new(Rendezvous::new(2));
        let r2 = rv.clone();
        let h = std::thread::spawn(move || r2.wait());
        std::thread::sleep(Duration::from_millis(20));
        rv.poison(1);
        assert!(matches!(h.join().unwrap(), Err(EngineError::ExecutorDied(1))));
        assert!(rv.wait().is_err());
    }

    #[test]
    fn last_arrival_leads() {
        let rv = Arc::new(Rendezvous::new(3));
        let leaders: usize = (0..3)
            .map(|_| {
                let rv = rv.clone();
                std::thread::spawn(move || rv.wait().unwrap())
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().unwrap() as usize)
            .sum();
        assert_eq!(leaders, 1);
    }
}
