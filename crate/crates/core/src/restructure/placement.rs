//! How operation chains are pooled and handed to workers.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::model::StateRef;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Placement {
    /// One chain pool per worker; chains are routed by hash.
    SharedNothing,
    /// One pool shared by every worker.
    SharedEverything,
    /// One pool per group of this many workers.
    SharedGroup(usize),
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::SharedNothing => f.write_str("shared-nothing"),
            Placement::SharedEverything => f.write_str("shared-everything"),
            Placement::SharedGroup(g) => write!(f, "shared-group:{g}"),
        }
    }
}

impl FromStr for Placement {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared-nothing" => Ok(Placement::SharedNothing),
            "shared-everything" => Ok(Placement::SharedEverything),
            other => {
                let g = other
                    .strip_prefix("shared-group:")
                    .and_then(|g| g.parse::<usize>().ok())
                    .filter(|g| *g >= 1)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown placement {other:?}")))?;
                Ok(Placement::SharedGroup(g))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlacementPolicy {
    pub kind: Placement,
    /// Workers of a sharing group pull from a common queue. Without it each
    /// worker gets a fixed hash-assigned share.
    pub steal: bool,
}

impl PlacementPolicy {
    pub fn new(kind: Placement) -> Self {
        Self {
            kind,
            steal: !matches!(kind, Placement::SharedNothing),
        }
    }

    pub fn shared_nothing() -> Self {
        Self::new(Placement::SharedNothing)
    }

    pub fn shared_everything() -> Self {
        Self::new(Placement::SharedEverything)
    }

    pub fn validate(&self, workers: usize) -> Result<(), ConfigError> {
        if workers == 0 {
            return Err(ConfigError::Invalid("worker count must be >= 1".into()));
        }
        if let Placement::SharedGroup(g) = self.kind {
            if g == 0 || !workers.is_multiple_of(g) {
                return Err(ConfigError::Invalid(format!(
                    "group size {g} does not divide {workers} workers"
                )));
            }
        }
        Ok(())
    }

    /// Number of task queues (chain pools).
    pub fn queue_count(&self, workers: usize) -> usize {
        if !self.steal {
            return workers;
        }
        match self.kind {
            Placement::SharedNothing => workers,
            Placement::SharedEverything => 1,
            Placement::SharedGroup(g) => workers / g,
        }
    }

    /// Queue a chain is routed to.
    pub fn queue_of(&self, state: StateRef, workers: usize) -> usize {
        (placement_hash(state) % self.queue_count(workers) as u64) as usize
    }

    /// Queue a worker pulls from.
    pub fn worker_queue(&self, worker: usize, workers: usize) -> usize {
        if !self.steal {
            return worker;
        }
        match self.kind {
            Placement::SharedNothing => worker,
            Placement::SharedEverything => 0,
            Placement::SharedGroup(g) => (worker / g).min(workers / g - 1),
        }
    }
}

/// Table-salted key hash; for table 0 it is the key itself, so dense keys
/// spread evenly under `mod`.
pub fn placement_hash(state: StateRef) -> u64 {
    state
        .key
        .wrapping_add(u64::from(state.table.0).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
