//! Streaming Ledger: deposits top up an account and an asset; transfers
//! move an amount from one account/asset pair to another and are rejected
//! when the source cannot cover it.

use rand::Rng;

use super::workload::{AppKind, BenchApp, KeyPicker, WorkloadConfig};
use crate::api::{
    ApiError, Cond, CondId, Fun, FunId, FunctionRegistry, OperatorError, OperatorLogic, TxnBuilder,
};
use crate::error::ConfigError;
use crate::model::{BlotterStatus, EventBlotter, Timestamp};
use crate::store::{StateStore, TableId, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlEvent {
    Deposit {
        account: u32,
        asset: u32,
        amount: i64,
    },
    Transfer {
        src: u32,
        dst: u32,
        amount: i64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlOutput {
    Deposited,
    Transferred,
    Rejected,
}

#[derive(Debug)]
pub struct Ledger {
    pub accounts: TableId,
    pub assets: TableId,
}

impl OperatorLogic for Ledger {
    type Payload = SlEvent;
    type Params = SlEvent;
    type Output = SlOutput;

    fn pre_process(&self, _ts: Timestamp, e: &SlEvent) -> Result<SlEvent, OperatorError> {
        match *e {
            SlEvent::Transfer { src, dst, .. } if src == dst => {
                Err(OperatorError(format!("transfer from {src} to itself")))
            }
            _ => Ok(*e),
        }
    }

    fn state_access(&self, e: &SlEvent, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        let (acc, ast) = (self.accounts, self.assets);
        match *e {
            SlEvent::Deposit {
                account,
                asset,
                amount,
            } => {
                txn.issue_read_modify(acc, account.into(), Fun::new(FunId::ADD, &[amount]), None)?;
                txn.issue_read_modify(ast, asset.into(), Fun::new(FunId::ADD, &[amount]), None)?;
            }
            SlEvent::Transfer { src, dst, amount } => {
                let (src, dst) = (u64::from(src), u64::from(dst));
                let covers = |t| Some(Cond::new(CondId::AT_LEAST, &[amount], t, src));
                // credits first: their conditions read the source before this
                // transaction debits it
                txn.issue_read_modify(acc, dst, Fun::new(FunId::ADD, &[amount]), covers(acc))?;
                txn.issue_read_modify(ast, dst, Fun::new(FunId::ADD, &[amount]), covers(ast))?;
                txn.issue_read_modify(acc, src, Fun::new(FunId::ADD, &[-amount]), covers(acc))?;
                txn.issue_read_modify(ast, src, Fun::new(FunId::ADD, &[-amount]), covers(ast))?;
            }
        }
        Ok(())
    }

    fn post_process(&self, e: &SlEvent, b: &EventBlotter<SlEvent>) -> SlOutput {
        match (b.status(), e) {
            (BlotterStatus::Committed, SlEvent::Deposit { .. }) => SlOutput::Deposited,
            (BlotterStatus::Committed, SlEvent::Transfer { .. }) => SlOutput::Transferred,
            _ => SlOutput::Rejected,
        }
    }

    fn failed(&self, _: &SlEvent, _: &OperatorError) -> SlOutput {
        SlOutput::Rejected
    }
}

impl BenchApp for Ledger {
    const KIND: AppKind = AppKind::Sl;

    fn setup(cfg: &WorkloadConfig) -> Result<(Self, FunctionRegistry, StateStore), ConfigError> {
        cfg.validate()?;
        let mut rng = cfg.population_rng();
        let floor = cfg.initial_balance;
        let mut rows = || {
            (0..cfg.table_size)
                .map(|k| (k, Value::Int(floor + rng.gen_range(0..=floor / 10))))
                .collect()
        };
        let mut store = StateStore::new();
        let accounts = store.add_table("accounts", rows());
        let assets = store.add_table("assets", rows());
        Ok((Ledger { accounts, assets }, FunctionRegistry::new(), store))
    }

    fn stream(cfg: &WorkloadConfig) -> Box<dyn Iterator<Item = SlEvent>> {
        let picker = KeyPicker::new(cfg.table_size, cfg.skew, 1);
        let mut rng = cfg.event_rng();
        Box::new((0..cfg.event_count).map(move |_| {
            let amount = rng.gen_range(1..=100);
            if rng.gen_bool(0.5) {
                SlEvent::Deposit {
                    account: picker.one(&mut rng) as u32,
                    asset: picker.one(&mut rng) as u32,
                    amount,
                }
            } else {
                let src = picker.one(&mut rng);
                let dst = loop {
                    let d = picker.one(&mut rng);
                    if d != src {
                        break d;
                    }
                };
                SlEvent::Transfer {
                    src: src as u32,
                    dst: dst as u32,
                    amount,
                }
            }
        }))
    }

    fn encode(e: &SlEvent, out: &mut Vec<u8>) {
        let (tag, a, b, amount) = match *e {
            SlEvent::Deposit {
                account,
                asset,
                amount,
            } => (0u8, account, asset, amount),
            SlEvent::Transfer { src, dst, amount } => (1u8, src, dst, amount),
        };
        out.push(tag);
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
        out.extend_from_slice(&amount.to_le_bytes());
    }
}
