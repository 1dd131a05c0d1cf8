//! A hand-written operator: a stock keeper that reserves units of an item
//! for incoming orders. An order that asks for more than is left gets
//! rejected and leaves stock untouched.
//!
//! cargo run --release --example custom_operator

use txstream::{
    ApiError, Cond, CondId, Engine, EngineConfig, EventBlotter, Fun, FunId, FunctionRegistry,
    OperatorError, OperatorLogic, StateStore, TableId, Timestamp, TxnBuilder, Value,
};

#[derive(Clone, Debug)]
struct Order {
    item: u64,
    units: i64,
}

#[derive(Clone, Debug, PartialEq)]
enum Reply {
    Reserved { left_before: i64 },
    OutOfStock,
    Invalid,
}

struct StockKeeper {
    stock: TableId,
}

impl OperatorLogic for StockKeeper {
    type Payload = Order;
    type Params = Order;
    type Output = Reply;

    fn pre_process(&self, _ts: Timestamp, o: &Order) -> Result<Order, OperatorError> {
        if o.units <= 0 {
            return Err(OperatorError(format!("bad unit count {}", o.units)));
        }
        Ok(o.clone())
    }

    fn state_access(&self, o: &Order, txn: &mut TxnBuilder) -> Result<(), ApiError> {
        let enough = Cond::new(CondId::AT_LEAST, &[o.units], self.stock, o.item);
        txn.issue_read_modify(self.stock, o.item, Fun::new(FunId::ADD, &[-o.units]), Some(enough))
    }

    fn post_process(&self, _: &Order, b: &EventBlotter<Order>) -> Reply {
        match b.result(0) {
            Some(Value::Int(before)) => Reply::Reserved { left_before: before },
            _ => Reply::OutOfStock,
        }
    }

    fn failed(&self, _: &Order, _: &OperatorError) -> Reply {
        Reply::Invalid
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = StateStore::new();
    let stock = store.add_table("stock", (0..4).map(|k| (k, Value::Int(10))).collect());
    let config = EngineConfig {
        executors: 2,
        interval: 4,
        ..EngineConfig::default()
    };
    let engine = Engine::new(StockKeeper { stock }, FunctionRegistry::new(), store, config)?;

    let orders = [(0, 4), (0, 4), (0, 4), (1, 0), (2, 10), (2, 1), (3, 3)]
        .into_iter()
        .map(|(item, units)| Order { item, units });
    let out = engine.run(orders)?;

    for r in &out.records {
        println!("ts {:>2}  {:?}", r.ts.0, r.output);
    }
    for k in 0..4 {
        let left = engine.store().latest(txstream::StateRef::new(stock, k))?;
        println!("item {k}: {left:?} left");
    }
    println!("{} committed, {} rejected", out.committed(), out.rejected());
    Ok(())
}
