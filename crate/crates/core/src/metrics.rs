//! Per-thread phase timers for the transaction-time breakdown.
//!
//! Only transaction processing is accounted: issuing, postponing and
//! executing state accesses plus any waiting they cause. Pre- and
//! post-processing of events are excluded from the denominator.

use std::time::Instant;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTimers {
    pub txns: u64,
    pub total_ns: u64,
    /// Accessing states.
    pub useful_ns: u64,
    /// Barrier, permit-counter and lock-grant waits.
    pub sync_ns: u64,
    /// Lock insertion.
    pub lock_ns: u64,
}

impl PhaseTimers {
    pub fn merge(&mut self, other: &PhaseTimers) {
        self.txns += other.txns;
        self.total_ns += other.total_ns;
        self.useful_ns += other.useful_ns;
        self.sync_ns += other.sync_ns;
        self.lock_ns += other.lock_ns;
    }

    pub fn others_ns(&self) -> u64 {
        self.total_ns
            .saturating_sub(self.useful_ns + self.sync_ns + self.lock_ns)
    }

    /// Mean nanoseconds per transaction.
    pub fn breakdown(&self) -> Breakdown {
        let n = self.txns.max(1) as f64;
        Breakdown {
            useful_ns: self.useful_ns as f64 / n,
            sync_ns: self.sync_ns as f64 / n,
            lock_ns: self.lock_ns as f64 / n,
            others_ns: self.others_ns() as f64 / n,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Breakdown {
    pub useful_ns: f64,
    pub sync_ns: f64,
    pub lock_ns: f64,
    pub others_ns: f64,
}

impl Breakdown {
    pub fn total_ns(&self) -> f64 {
        self.useful_ns + self.sync_ns + self.lock_ns + self.others_ns
    }

    pub fn sync_share(&self) -> f64 {
        let t = self.total_ns();
        if t > 0.0 {
            self.sync_ns / t
        } else {
            0.0
        }
    }
}

pub(crate) fn since(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}
