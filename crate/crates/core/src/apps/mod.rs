//! Benchmark applications and their workload generators.

pub mod gs;
pub mod ob;
pub mod sl;
pub mod tp;
pub mod workload;
pub mod zipf;

pub use gs::{GrepSum, GsEvent, GsOutput};
pub use ob::{Bidding, ObEvent, ObOutput};
pub use sl::{Ledger, SlEvent, SlOutput};
pub use tp::{TollProcessing, TpEvent, TpOutput, TpStage};
pub use workload::{dump_trace, AppKind, BenchApp, WorkloadConfig};
pub use zipf::ZipfSampler;
