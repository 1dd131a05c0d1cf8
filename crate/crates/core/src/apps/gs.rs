//! Grep and Sum: each event reads or overwrites ten records of one table;
//! read results are summed downstream.

use rand::Rng;

use super::workload::{AppKind, BenchApp, KeyPicker, WorkloadConfig};
use crate::api::{ApiError, FunctionRegistry, OperatorError, OperatorLogic, TxnBuilder};
use crate::error::ConfigError;
use crate::model::{EventBlotter, Timestamp};
use crate::store::{StateStore, TableId, Value};

pub const TXN_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GsEvent {
    pub read: bool,
    pub keys: [u32; TXN_LEN],
    pub values: [i64; TXN_LEN],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GsOutput {
    Sum(i64),
    Written,
    Rejected,
}

#[derive(Debug)]
pub struct GrepSum {
    pub table: TableId,
}

impl OperatorLogic for GrepSum {
    type Payload = GsEvent;
    type Params = GsEvent;
    type Output = GsOutput;

    fn pre_process(&self, _ts: Timestamp, e: &GsEvent) -> Result<GsEvent, OperatorError> {
        Ok(e.clone())
    }

    fn state_access(&self, e: &GsEvent, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        for (k, v) in e.keys.iter().zip(e.values) {
            if e.read {
                txn.issue_read(self.table, u64::from(*k))?;
            } else {
                txn.issue_write(self.table, u64::from(*k), Value::Int(v), None)?;
            }
        }
        Ok(())
    }

    fn post_process(&self, e: &GsEvent, b: &EventBlotter<GsEvent>) -> GsOutput {
        if b.status() != crate::model::BlotterStatus::Committed {
            return GsOutput::Rejected;
        }
        if !e.read {
            return GsOutput::Written;
        }
        GsOutput::Sum(
            b.results()
                .iter()
                .map(|v| v.as_ref().and_then(Value::as_int).unwrap_or(0))
                .sum(),
        )
    }

    fn failed(&self, _: &GsEvent, _: &OperatorError) -> GsOutput {
        GsOutput::Rejected
    }
}

impl BenchApp for GrepSum {
    const KIND: AppKind = AppKind::Gs;

    fn setup(cfg: &WorkloadConfig) -> Result<(Self, FunctionRegistry, StateStore), ConfigError> {
        cfg.validate()?;
        let mut rng = cfg.population_rng();
        let mut store = StateStore::new();
        let rows = (0..cfg.table_size)
            .map(|k| (k, Value::Int(rng.gen_range(0..1_000_000))))
            .collect();
        let table = store.add_table("records", rows);
        Ok((GrepSum { table }, FunctionRegistry::new(), store))
    }

    fn stream(cfg: &WorkloadConfig) -> Box<dyn Iterator<Item = GsEvent>> {
        let picker = KeyPicker::new(cfg.table_size, cfg.skew, cfg.partitions);
        let mut rng = cfg.event_rng();
        let (read_ratio, mp_ratio, mp_length) = (cfg.read_ratio, cfg.mp_ratio, cfg.mp_length);
        let mut keys = Vec::with_capacity(TXN_LEN);
        Box::new((0..cfg.event_count).map(move |_| {
            let read = rng.gen_bool(read_ratio);
            let span = if rng.gen_bool(mp_ratio) { mp_length } else { 1 };
            picker.pick(&mut rng, TXN_LEN, span, &mut keys);
            let mut e = GsEvent {
                read,
                keys: [0; TXN_LEN],
                values: [0; TXN_LEN],
            };
            for i in 0..TXN_LEN {
                e.keys[i] = keys[i] as u32;
                if !read {
                    e.values[i] = rng.gen_range(0..1_000_000);
                }
            }
            e
        }))
    }

    fn encode(e: &GsEvent, out: &mut Vec<u8>) {
        out.push(e.read as u8);
        for k in e.keys {
            out.extend_from_slice(&k.to_le_bytes());
        }
        for v in e.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}
