//! Toll Processing: position reports update per-segment average speed and
//! the set of vehicles seen, and every report gets a toll computed from the
//! segment's state as of that report.
//!
//! The three operators are fused into one logic; a report arrives as three
//! consecutive events (speed update, vehicle count update, toll query).

use rand::Rng;

use super::workload::{AppKind, BenchApp, WorkloadConfig};
use super::zipf::ZipfSampler;
use crate::api::{ApiError, Fun, FunId, FunctionRegistry, OperatorError, OperatorLogic, TxnBuilder};
use crate::error::ConfigError;
use crate::model::{BlotterStatus, EventBlotter, Timestamp};
use crate::store::{StateStore, TableId, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpStage {
    RoadSpeed,
    VehicleCount,
    TollNotification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TpEvent {
    pub stage: TpStage,
    pub vehicle: u32,
    pub segment: u32,
    pub speed: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpOutput {
    Updated,
    Toll { vehicle: u32, toll: i64 },
    Rejected,
}

/// Toll for a segment with the given average speed and vehicle count.
pub fn toll(avg_speed: f64, vehicles: usize) -> i64 {
    if avg_speed < 40.0 {
        let over = vehicles as i64 - 150;
        2 * over * over
    } else {
        0
    }
}

#[derive(Debug)]
pub struct TollProcessing {
    pub speed: TableId,
    pub count: TableId,
}

impl OperatorLogic for TollProcessing {
    type Payload = TpEvent;
    type Params = TpEvent;
    type Output = TpOutput;

    fn pre_process(&self, _ts: Timestamp, e: &TpEvent) -> Result<TpEvent, OperatorError> {
        Ok(*e)
    }

    fn state_access(&self, e: &TpEvent, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        let seg = u64::from(e.segment);
        match e.stage {
            TpStage::RoadSpeed => {
                txn.issue_read_modify(self.speed, seg, Fun::new(FunId::AVG_PUSH, &[e.speed.into()]), None)
            }
            TpStage::VehicleCount => txn.issue_read_modify(
                self.count,
                seg,
                Fun::new(FunId::SET_INSERT, &[e.vehicle.into()]),
                None,
            ),
            TpStage::TollNotification => {
                txn.issue_read(self.speed, seg)?;
                txn.issue_read(self.count, seg)
            }
        }
    }

    fn post_process(&self, e: &TpEvent, b: &EventBlotter<TpEvent>) -> TpOutput {
        if b.status() != BlotterStatus::Committed {
            return TpOutput::Rejected;
        }
        if e.stage != TpStage::TollNotification {
            return TpOutput::Updated;
        }
        let avg = match b.result(0) {
            Some(Value::Avg { count, sum }) if count > 0 => sum as f64 / count as f64,
            _ => 0.0,
        };
        let cnt = match b.result(1) {
            Some(Value::IdSet(s)) => s.len(),
            _ => 0,
        };
        TpOutput::Toll {
            vehicle: e.vehicle,
            toll: toll(avg, cnt),
        }
    }

    fn failed(&self, _: &TpEvent, _: &OperatorError) -> TpOutput {
        TpOutput::Rejected
    }
}

impl BenchApp for TollProcessing {
    const KIND: AppKind = AppKind::Tp;

    fn setup(cfg: &WorkloadConfig) -> Result<(Self, FunctionRegistry, StateStore), ConfigError> {
        cfg.validate()?;
        let mut store = StateStore::new();
        let speed = store.add_table(
            "road_speed",
            (0..cfg.table_size).map(|k| (k, Value::Avg { count: 0, sum: 0 })).collect(),
        );
        let count = store.add_table(
            "vehicle_count",
            (0..cfg.table_size).map(|k| (k, Value::empty_set())).collect(),
        );
        Ok((TollProcessing { speed, count }, FunctionRegistry::new(), store))
    }

    fn stream(cfg: &WorkloadConfig) -> Box<dyn Iterator<Item = TpEvent>> {
        let segments = ZipfSampler::new(cfg.table_size, cfg.skew);
        let mut rng = cfg.event_rng();
        let vehicles = cfg.vehicles;
        let reports = std::iter::repeat_with(move || {
            let vehicle = rng.gen_range(0..vehicles);
            let segment = segments.sample(&mut rng) as u32;
            let speed = rng.gen_range(0..=100);
            [TpStage::RoadSpeed, TpStage::VehicleCount, TpStage::TollNotification].map(|stage| {
                TpEvent {
                    stage,
                    vehicle,
                    segment,
                    speed,
                }
            })
        });
        Box::new(reports.flatten().take(cfg.event_count))
    }

    fn encode(e: &TpEvent, out: &mut Vec<u8>) {
        out.push(e.stage as u8);
        out.extend_from_slice(&e.vehicle.to_le_bytes());
        out.extend_from_slice(&e.segment.to_le_bytes());
        out.extend_from_slice(&e.speed.to_le_bytes());
    }
}
