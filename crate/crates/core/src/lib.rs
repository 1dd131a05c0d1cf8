//! Transactional state management for data stream processing.
//!
//! Operators describe the shared-state accesses of each input event as a
//! state transaction. Instead of locking, transactions are postponed until
//! the next punctuation, decomposed into per-state operation chains and
//! evaluated in parallel, with results identical to running every
//! transaction serially in timestamp order. Lock-based comparison schemes,
//! four benchmark applications and a measurement harness are included.

pub mod api;
pub mod apps;
pub mod baselines;
pub mod error;
mod exec;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod restructure;
pub mod scheduler;
pub mod store;
pub mod trace;

pub use api::{
    build_transaction, ApiError, Cond, CondId, Fun, FunId, FunctionRegistry, OperatorError,
    OperatorLogic, TxnBuilder,
};
pub use error::{ConfigError, EngineError};
pub use model::{BlotterStatus, Event, EventBlotter, StateRef, StateTransaction, Timestamp};
pub use scheduler::{Engine, EngineConfig, RunOutput, Scheme, SinkRecord};
pub use store::{Key, StateStore, TableId, Value};
