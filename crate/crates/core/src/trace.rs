//! Optional per-operation execution trace of the chain evaluator.

use std::fmt;

use crate::model::{StateRef, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Read,
    Write,
    ReadModify,
    /// Visible-value lookup of a foreign state (condition or function input).
    DepRead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceOutcome {
    Applied,
    CondFailed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub batch: u64,
    pub pass: usize,
    pub level: usize,
    pub worker: usize,
    pub state: StateRef,
    pub ts: Timestamp,
    pub kind: TraceKind,
    pub outcome: TraceOutcome,
    /// Global happens-before order of trace emission.
    pub order: u64,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{:?},{:?}",
            self.batch,
            self.level,
            self.worker,
            self.state.table.0,
            self.state.key,
            self.ts,
            self.kind,
            self.outcome
        )
    }
}

pub const TRACE_HEADER: &str = "batch_id,level,worker,table,key,ts,kind,outcome";
