//! Workload configuration and the key pickers shared by the generators.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::zipf::ZipfSampler;
use crate::api::{FunctionRegistry, OperatorLogic};
use crate::error::ConfigError;
use crate::model::EventKind;
use crate::scheduler::plan_stream;
use crate::store::StateStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AppKind {
    Gs,
    Sl,
    Ob,
    Tp,
}

impl AppKind {
    pub const ALL: [AppKind; 4] = [AppKind::Gs, AppKind::Sl, AppKind::Ob, AppKind::Tp];
}

impl fmt::Display for AppKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AppKind::Gs => "gs",
            AppKind::Sl => "sl",
            AppKind::Ob => "ob",
            AppKind::Tp => "tp",
        })
    }
}

impl FromStr for AppKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(AppKind::Gs),
            "sl" => Ok(AppKind::Sl),
            "ob" => Ok(AppKind::Ob),
            "tp" => Ok(AppKind::Tp),
            other => Err(ConfigError::Invalid(format!("unknown app {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub app: AppKind,
    /// Records per table (road segments for TP).
    pub table_size: u64,
    pub skew: f64,
    /// Share of read events (GS).
    pub read_ratio: f64,
    /// Share of multi-partition transactions (GS, OB).
    pub mp_ratio: f64,
    /// Partitions spanned by a multi-partition transaction.
    pub mp_length: usize,
    /// Key partitions the generator draws from; PAT uses the same split.
    pub partitions: usize,
    pub seed: u64,
    pub event_count: usize,
    /// Lower bound of SL starting balances.
    pub initial_balance: i64,
    /// Distinct vehicles in TP.
    pub vehicles: u32,
}

impl WorkloadConfig {
    pub fn new(app: AppKind) -> Self {
        let tp = app == AppKind::Tp;
        Self {
            app,
            table_size: if tp { 100 } else { 10_000 },
            skew: if tp { 0.2 } else { 0.6 },
            read_ratio: 0.5,
            mp_ratio: 0.25,
            mp_length: 4,
            partitions: 8,
            seed: 1,
            event_count: 10_000,
            initial_balance: 10_000,
            vehicles: 200,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.table_size == 0 {
            return bad("table size must be at least 1".into());
        }
        if !(self.skew >= 0.0 && self.skew.is_finite()) {
            return bad(format!("skew must be a finite value >= 0, got {}", self.skew));
        }
        for (name, v) in [("read_ratio", self.read_ratio), ("mp_ratio", self.mp_ratio)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.partitions == 0 {
            return bad("partition count must be at least 1".into());
        }
        if self.mp_length == 0 || self.mp_length > self.partitions {
            return bad(format!(
                "mp_length {} must be between 1 and the partition count {}",
                self.mp_length, self.partitions
            ));
        }
        let per_partition = self.table_size / self.partitions as u64;
        let widest = match self.app {
            AppKind::Gs => 10,
            AppKind::Ob => 20,
            AppKind::Sl => 2,
            AppKind::Tp => 1,
        };
        if matches!(self.app, AppKind::Gs | AppKind::Ob) && per_partition < widest {
            return bad(format!(
                "{} needs at least {widest} keys per partition, table_size {} over {} partitions has {per_partition}",
                self.app, self.table_size, self.partitions
            ));
        }
        if self.app == AppKind::Sl && self.table_size < 2 {
            return bad("sl needs at least two accounts".into());
        }
        if self.app == AppKind::Tp && self.vehicles == 0 {
            return bad("tp needs at least one vehicle".into());
        }
        if self.initial_balance < 1 {
            return bad("initial balance must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn population_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub(crate) fn event_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }
}

/// An application together with its table population and event generator.
pub trait BenchApp: OperatorLogic + Sized {
    const KIND: AppKind;

    /// Operator logic, function registry and freshly populated tables.
    fn setup(cfg: &WorkloadConfig) -> Result<(Self, FunctionRegistry, StateStore), ConfigError>;

    /// The `cfg.event_count` input events, deterministic in `cfg.seed`.
    fn stream(cfg: &WorkloadConfig) -> Box<dyn Iterator<Item = Self::Payload>>;

    /// Fixed-width little-endian encoding of one payload.
    fn encode(payload: &Self::Payload, out: &mut Vec<u8>);
}

/// Writes `(ts, payload)` records of the data events, as timestamped for
/// the given punctuation interval.
pub fn dump_trace<A: BenchApp>(
    cfg: &WorkloadConfig,
    interval: usize,
    mut out: impl Write,
) -> io::Result<u64> {
    let plan = plan_stream(A::stream(cfg), interval)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let mut buf = Vec::with_capacity(256);
    let mut n = 0;
    for p in plan {
        if let EventKind::Data(payload) = p.event.kind {
            buf.clear();
            buf.extend_from_slice(&p.event.ts.0.to_le_bytes());
            A::encode(&payload, &mut buf);
            out.write_all(&buf)?;
            n += 1;
        }
    }
    out.flush()?;
    Ok(n)
}

/// Draws distinct Zipf keys, either from one partition or spread over a
/// given number of partitions. Partition `p` holds keys `k` with
/// `k % partitions == p`.
#[derive(Clone, Debug)]
pub(crate) struct KeyPicker {
    global: ZipfSampler,
    local: Vec<ZipfSampler>,
    partitions: u64,
}

impl KeyPicker {
    pub(crate) fn new(n: u64, theta: f64, partitions: usize) -> Self {
        let p = partitions as u64;
        let local = (0..p)
            .map(|i| ZipfSampler::new((n - i).div_ceil(p).max(1), theta))
            .collect();
        Self {
            global: ZipfSampler::new(n, theta),
            local,
            partitions: p,
        }
    }

    pub(crate) fn one<R: Rng>(&self, rng: &mut R) -> u64 {
        self.global.sample(rng)
    }

    fn in_partition<R: Rng>(&self, rng: &mut R, p: u64) -> u64 {
        self.local[p as usize].sample(rng) * self.partitions + p
    }

    /// `count` distinct keys. Multi-partition picks cover exactly `span`
    /// partitions, the first one chosen like a single-partition pick.
    pub(crate) fn pick<R: Rng>(&self, rng: &mut R, count: usize, span: usize, out: &mut Vec<u64>) {
        out.clear();
        let home = self.one(rng) % self.partitions;
        let mut parts = vec![home];
        if span > 1 {
            let others: Vec<u64> = (0..self.partitions).filter(|p| *p != home).collect();
            for i in sample(rng, others.len(), span - 1) {
                parts.push(others[i]);
            }
        }
        for i in 0..count {
            let p = parts[i % parts.len()];
            loop {
                let k = self.in_partition(rng, p);
                if !out.contains(&k) {
                    out.push(k);
                    break;
                }
            }
        }
    }
}
