//! No isolation at all: operations run as soon as they are issued, with
//! only per-record latches keeping the memory safe. Results are not
//! ordered and may not match a serial execution.

use std::time::Instant;

use super::{run_in_place, EagerScheme, Outcome};
use crate::api::FunctionRegistry;
use crate::metrics::{since, PhaseTimers};
use crate::model::StateTransaction;
use crate::store::StateStore;

#[derive(Debug, Default)]
pub struct NoLockScheme;

impl EagerScheme for NoLockScheme {
    fn name(&self) -> &'static str {
        "No-Lock"
    }

    fn halt(&self) {}

    fn execute(
        &self,
        txn: &StateTransaction,
        store: &StateStore,
        registry: &FunctionRegistry,
        timers: &mut PhaseTimers,
    ) -> Outcome {
        let t = Instant::now();
        let outcome = run_in_place(txn, store, registry);
        timers.useful_ns += since(t);
        outcome
    }
}
