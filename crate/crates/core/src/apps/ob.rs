//! Online Bidding: bids buy from one item if the price is right and stock
//! suffices; alters reprice twenty items; tops restock twenty items.

use rand::Rng;

use super::workload::{AppKind, BenchApp, KeyPicker, WorkloadConfig};
use crate::api::{
    ApiError, Cond, CondId, Fun, FunId, FunctionRegistry, OperatorError, OperatorLogic, TxnBuilder,
};
use crate::error::ConfigError;
use crate::model::{BlotterStatus, EventBlotter, Timestamp};
use crate::store::{StateStore, TableId, Value};

pub const LIST_LEN: usize = 20;
pub const MAX_PRICE: i64 = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObEvent {
    Bid { item: u32, price: i64, qty: i64 },
    Alter { items: [u32; LIST_LEN], prices: [i64; LIST_LEN] },
    Top { items: [u32; LIST_LEN], qtys: [i64; LIST_LEN] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObOutput {
    Bought,
    Altered,
    Topped,
    Rejected,
}

#[derive(Debug)]
pub struct Bidding {
    pub items: TableId,
}

impl OperatorLogic for Bidding {
    type Payload = ObEvent;
    type Params = ObEvent;
    type Output = ObOutput;

    fn pre_process(&self, _ts: Timestamp, e: &ObEvent) -> Result<ObEvent, OperatorError> {
        Ok(e.clone())
    }

    fn state_access(&self, e: &ObEvent, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        let t = self.items;
        match e {
            ObEvent::Bid { item, price, qty } => {
                let k = u64::from(*item);
                txn.issue_read_modify(
                    t,
                    k,
                    Fun::new(FunId::QTY_ADD, &[-qty]),
                    Some(Cond::new(CondId::BID_OK, &[*price, *qty], t, k)),
                )?;
            }
            ObEvent::Alter { items, prices } => {
                for (k, p) in items.iter().zip(prices) {
                    txn.issue_read_modify(t, u64::from(*k), Fun::new(FunId::SET_PRICE, &[*p]), None)?;
                }
            }
            ObEvent::Top { items, qtys } => {
                for (k, q) in items.iter().zip(qtys) {
                    txn.issue_read_modify(t, u64::from(*k), Fun::new(FunId::QTY_ADD, &[*q]), None)?;
                }
            }
        }
        Ok(())
    }

    fn post_process(&self, e: &ObEvent, b: &EventBlotter<ObEvent>) -> ObOutput {
        if b.status() != BlotterStatus::Committed {
            return ObOutput::Rejected;
        }
        match e {
            ObEvent::Bid { .. } => ObOutput::Bought,
            ObEvent::Alter { .. } => ObOutput::Altered,
            ObEvent::Top { .. } => ObOutput::Topped,
        }
    }

    fn failed(&self, _: &ObEvent, _: &OperatorError) -> ObOutput {
        ObOutput::Rejected
    }
}

impl BenchApp for Bidding {
    const KIND: AppKind = AppKind::Ob;

    fn setup(cfg: &WorkloadConfig) -> Result<(Self, FunctionRegistry, StateStore), ConfigError> {
        cfg.validate()?;
        let mut rng = cfg.population_rng();
        let rows = (0..cfg.table_size)
            .map(|k| {
                let price = rng.gen_range(1..=MAX_PRICE);
                let qty = rng.gen_range(0..=1000);
                (k, Value::PriceQty { price, qty })
            })
            .collect();
        let mut store = StateStore::new();
        let items = store.add_table("items", rows);
        Ok((Bidding { items }, FunctionRegistry::new(), store))
    }

    fn stream(cfg: &WorkloadConfig) -> Box<dyn Iterator<Item = ObEvent>> {
        let picker = KeyPicker::new(cfg.table_size, cfg.skew, cfg.partitions);
        let mut rng = cfg.event_rng();
        let (mp_ratio, mp_length) = (cfg.mp_ratio, cfg.mp_length);
        let mut keys = Vec::with_capacity(LIST_LEN);
        Box::new((0..cfg.event_count).map(move |_| {
            let kind = rng.gen_range(0..8);
            if kind < 6 {
                return ObEvent::Bid {
                    item: picker.one(&mut rng) as u32,
                    price: rng.gen_range(1..=MAX_PRICE),
                    qty: rng.gen_range(1..=10),
                };
            }
            let span = if rng.gen_bool(mp_ratio) { mp_length } else { 1 };
            picker.pick(&mut rng, LIST_LEN, span, &mut keys);
            let mut items = [0u32; LIST_LEN];
            let mut nums = [0i64; LIST_LEN];
            for i in 0..LIST_LEN {
                items[i] = keys[i] as u32;
                nums[i] = if kind == 6 {
                    rng.gen_range(1..=MAX_PRICE)
                } else {
                    rng.gen_range(1..=10)
                };
            }
            if kind == 6 {
                ObEvent::Alter { items, prices: nums }
            } else {
                ObEvent::Top { items, qtys: nums }
            }
        }))
    }

    fn encode(e: &ObEvent, out: &mut Vec<u8>) {
        let (tag, items, nums): (u8, &[u32], &[i64]) = match e {
            ObEvent::Bid { item, price, qty } => {
                out.push(0);
                out.extend_from_slice(&item.to_le_bytes());
                out.extend_from_slice(&price.to_le_bytes());
                out.extend_from_slice(&qty.to_le_bytes());
                // pad to the width of a list request
                out.resize(out.len() + (LIST_LEN - 1) * 4 + (LIST_LEN - 2) * 8, 0);
                return;
            }
            ObEvent::Alter { items, prices } => (1, items, prices),
            ObEvent::Top { items, qtys } => (2, items, qtys),
        };
        out.push(tag);
        for k in items {
            out.extend_from_slice(&k.to_le_bytes());
        }
        for n in nums {
            out.extend_from_slice(&n.to_le_bytes());
        }
    }
}
