//! Transaction restructuring: operation chains, dependency levels,
//! placement and batch evaluation.

pub mod chain;
pub mod evaluate;
pub mod levels;
pub mod placement;

pub use chain::{ChainPool, OperationChain};
pub use evaluate::{assign_work, evaluate_batch, run_batch, BatchResult, EvalContext, Schedule};
pub use levels::{build_levels, DependencyLevels, Task, TaskState};
pub use placement::{Placement, PlacementPolicy};
