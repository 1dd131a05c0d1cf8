//! Operator contract and the state-access primitives that build transactions.
//!
//! An operator splits its per-event work into `pre_process`, `state_access`
//! and `post_process`. `state_access` only *describes* state accesses through
//! a [`TxnBuilder`]; whether they run right away or after the next
//! punctuation is up to the scheme, so operator code is scheme-agnostic.

use std::fmt::Debug;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::model::{
    Args, Condition, EventBlotter, FunCall, OpKind, Operation, OperatorId, StateRef,
    StateTransaction, Timestamp, TxnShared,
};
use crate::store::{Key, TableId, Value};

/// Selector of a registered update function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FunId(pub u16);

/// Selector of a registered condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CondId(pub u16);

pub type UpdateFn = fn(&Value, &[i64]) -> Value;
pub type CondFn = fn(&Value, &[i64]) -> bool;

impl FunId {
    pub const IDENTITY: FunId = FunId(0);
    /// `Int(v) -> Int(v + a0)`
    pub const ADD: FunId = FunId(1);
    /// `PriceQty -> qty + a0`
    pub const QTY_ADD: FunId = FunId(2);
    /// `PriceQty -> price = a0`
    pub const SET_PRICE: FunId = FunId(3);
    /// `Avg -> (count + 1, sum + a0)`
    pub const AVG_PUSH: FunId = FunId(4);
    /// `IdSet -> set ∪ {a0}`
    pub const SET_INSERT: FunId = FunId(5);
    /// `v -> Int(int(v) + a0)`, used with a foreign source.
    pub const COPY_ADD: FunId = FunId(6);
}

impl CondId {
    /// `Int(v) >= a0`
    pub const AT_LEAST: CondId = CondId(0);
    /// `PriceQty`: `a0 >= price && qty >= a1`
    pub const BID_OK: CondId = CondId(1);
    pub const ALWAYS: CondId = CondId(2);
}

fn identity(v: &Value, _: &[i64]) -> Value {
    v.clone()
}

fn add(v: &Value, a: &[i64]) -> Value {
    match v {
        Value::Int(x) => Value::Int(x + a[0]),
        other => panic!("add on non-integer {other}"),
    }
}

fn qty_add(v: &Value, a: &[i64]) -> Value {
    match v {
        Value::PriceQty { price, qty } => Value::PriceQty {
            price: *price,
            qty: qty + a[0],
        },
        other => panic!("qty_add on {other}"),
    }
}

fn set_price(v: &Value, a: &[i64]) -> Value {
    match v {
        Value::PriceQty { qty, .. } => Value::PriceQty {
            price: a[0],
            qty: *qty,
        },
        other => panic!("set_price on {other}"),
    }
}

fn avg_push(v: &Value, a: &[i64]) -> Value {
    match v {
        Value::Avg { count, sum } => Value::Avg {
            count: count + 1,
            sum: sum + a[0] as u64,
        },
        other => panic!("avg_push on {other}"),
    }
}

fn set_insert(v: &Value, a: &[i64]) -> Value {
    match v {
        Value::IdSet(s) => {
            let id = a[0] as u32;
            if s.contains(&id) {
                Value::IdSet(s.clone())
            } else {
                let mut next = (**s).clone();
                next.insert(id);
                Value::IdSet(Arc::new(next))
            }
        }
        other => panic!("set_insert on {other}"),
    }
}

fn copy_add(v: &Value, a: &[i64]) -> Value {
    match v {
        Value::Int(x) => Value::Int(x + a[0]),
        Value::PriceQty { qty, .. } => Value::Int(qty + a[0]),
        Value::Avg { count, .. } => Value::Int(*count as i64 + a[0]),
        Value::IdSet(s) => Value::Int(s.len() as i64 + a[0]),
    }
}

fn at_least(v: &Value, a: &[i64]) -> bool {
    matches!(v, Value::Int(x) if *x >= a[0])
}

fn bid_ok(v: &Value, a: &[i64]) -> bool {
    matches!(v, Value::PriceQty { price, qty } if a[0] >= *price && *qty >= a[1])
}

fn always(_: &Value, _: &[i64]) -> bool {
    true
}

/// Pure functions and predicates addressable by selector. Immutable once
/// the engine is built.
#[derive(Clone, Debug)]
pub struct FunctionRegistry {
    funs: Vec<(&'static str, UpdateFn)>,
    conds: Vec<(&'static str, CondFn)>,
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl FunctionRegistry {
    /// Registry preloaded with the built-in selectors on [`FunId`] / [`CondId`].
    pub fn new() -> Self {
        Self {
            funs: vec![
                ("identity", identity),
                ("add", add),
                ("qty_add", qty_add),
                ("set_price", set_price),
                ("avg_push", avg_push),
                ("set_insert", set_insert),
                ("copy_add", copy_add),
            ],
            conds: vec![("at_least", at_least), ("bid_ok", bid_ok), ("always", always)],
        }
    }

    pub fn register_fun(&mut self, name: &'static str, f: UpdateFn) -> FunId {
        self.funs.push((name, f));
        FunId((self.funs.len() - 1) as u16)
    }

    pub fn register_cond(&mut self, name: &'static str, f: CondFn) -> CondId {
        self.conds.push((name, f));
        CondId((self.conds.len() - 1) as u16)
    }

    pub fn apply(&self, fun: FunId, input: &Value, args: &[i64]) -> Value {
        (self.funs[fun.0 as usize].1)(input, args)
    }

    pub fn check(&self, cond: CondId, input: &Value, args: &[i64]) -> bool {
        (self.conds[cond.0 as usize].1)(input, args)
    }

    pub fn fun_name(&self, fun: FunId) -> &'static str {
        self.funs[fun.0 as usize].0
    }

    pub fn cond_name(&self, cond: CondId) -> &'static str {
        self.conds[cond.0 as usize].0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApiError {
    #[error("state access primitive issued outside state_access: {0}")]
    ApiMisuse(&'static str),
}

/// Failure raised by operator code; the event is rejected and processing
/// continues.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("operator failure: {0}")]
pub struct OperatorError(pub String);

/// Condition argument of `issue_write` / `issue_read_modify`.
#[derive(Clone, Debug)]
pub struct Cond {
    pub cfun: CondId,
    pub args: Args,
    pub on: StateRef,
}

impl Cond {
    pub fn new(cfun: CondId, args: &[i64], table: TableId, key: Key) -> Self {
        Self {
            cfun,
            args: SmallVec::from_slice(args),
            on: StateRef::new(table, key),
        }
    }
}

/// Update argument of `issue_read_modify`.
#[derive(Clone, Debug)]
pub struct Fun {
    pub fun: FunId,
    pub args: Args,
    pub source: Option<StateRef>,
}

impl Fun {
    pub fn new(fun: FunId, args: &[i64]) -> Self {
        Self {
            fun,
            args: SmallVec::from_slice(args),
            source: None,
        }
    }

    /// Feeds the function from another state instead of the target.
    pub fn from_state(mut self, table: TableId, key: Key) -> Self {
        self.source = Some(StateRef::new(table, key));
        self
    }
}

struct PendingOp {
    target: StateRef,
    kind: OpKind,
    value: Option<Value>,
    fun: Option<FunCall>,
    cond: Option<Condition>,
    own_wrote: bool,
    slot: Option<u16>,
}

/// Collects the primitives issued by one `state_access` call.
pub struct TxnBuilder {
    ts: Timestamp,
    seq: u64,
    origin: OperatorId,
    ops: Vec<PendingOp>,
    slots: u16,
    sealed: bool,
}

impl TxnBuilder {
    pub fn new(ts: Timestamp, seq: u64, origin: OperatorId) -> Self {
        Self {
            ts,
            seq,
            origin,
            ops: Vec::new(),
            slots: 0,
            sealed: false,
        }
    }

    pub fn ts(&self) -> Timestamp {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn wrote(&self, s: StateRef) -> bool {
        self.ops.iter().any(|o| o.target == s && o.kind.writes())
    }

    fn guard(&self, what: &'static str) -> Result<(), ApiError> {
        if self.sealed {
            Err(ApiError::ApiMisuse(what))
        } else {
            Ok(())
        }
    }

    fn condition(&self, cond: Option<Cond>) -> Option<Condition> {
        cond.map(|c| Condition {
            own_wrote: self.wrote(c.on),
            cfun: c.cfun,
            args: c.args,
            on: c.on,
        })
    }

    fn next_slot(&mut self) -> u16 {
        self.slots += 1;
        self.slots - 1
    }

    pub fn issue_read(&mut self, table: TableId, key: Key) -> Result<(), ApiError> {
        self.guard("READ")?;
        let target = StateRef::new(table, key);
        let own_wrote = self.wrote(target);
        let slot = self.next_slot();
        self.ops.push(PendingOp {
            target,
            kind: OpKind::Read,
            value: None,
            fun: None,
            cond: None,
            own_wrote,
            slot: Some(slot),
        });
        Ok(())
    }

    /// `state(key) <- value`, applied only if `cond` holds (or is absent).
    pub fn issue_write(
        &mut self,
        table: TableId,
        key: Key,
        value: Value,
        cond: Option<Cond>,
    ) -> Result<(), ApiError> {
        self.guard("WRITE")?;
        let target = StateRef::new(table, key);
        let cond = self.condition(cond);
        let own_wrote = self.wrote(target);
        self.ops.push(PendingOp {
            target,
            kind: OpKind::Write,
            value: Some(value),
            fun: None,
            cond,
            own_wrote,
            slot: None,
        });
        Ok(())
    }

    /// `state(key) <- fun(state(source))`, applied only if `cond` holds.
    /// The prior value of `key` lands in the next result slot.
    pub fn issue_read_modify(
        &mut self,
        table: TableId,
        key: Key,
        fun: Fun,
        cond: Option<Cond>,
    ) -> Result<(), ApiError> {
        self.guard("READ_MODIFY")?;
        let target = StateRef::new(table, key);
        let cond = self.condition(cond);
        let own_wrote = self.wrote(target);
        let fun = FunCall {
            source_own_wrote: fun.source.is_some_and(|s| self.wrote(s)),
            fun: fun.fun,
            args: fun.args,
            source: fun.source.filter(|s| *s != target),
        };
        let slot = self.next_slot();
        self.ops.push(PendingOp {
            target,
            kind: OpKind::ReadModify,
            value: None,
            fun: Some(fun),
            cond,
            own_wrote,
            slot: Some(slot),
        });
        Ok(())
    }

    /// Seals the builder; any later issue is an [`ApiError::ApiMisuse`].
    pub fn finish(&mut self) -> StateTransaction {
        self.sealed = true;
        let shared = Arc::new(TxnShared::new(self.ts, self.slots as usize));
        let ops = self
            .ops
            .drain(..)
            .enumerate()
            .map(|(pos, p)| Operation {
                ts: self.ts,
                pos: pos as u16,
                target: p.target,
                kind: p.kind,
                value: p.value,
                fun: p.fun,
                cond: p.cond,
                own_wrote: p.own_wrote,
                result_slot: p.slot,
                txn: shared.clone(),
            })
            .collect();
        StateTransaction {
            ts: self.ts,
            seq: self.seq,
            ops,
            origin: self.origin,
            shared,
        }
    }
}

/// User-implemented operator logic.
pub trait OperatorLogic: Send + Sync + 'static {
    type Payload: Clone + Send + Sync + 'static;
    type Params: Send + 'static;
    type Output: Clone + Debug + PartialEq + Send + 'static;

    fn pre_process(&self, ts: Timestamp, payload: &Self::Payload)
        -> Result<Self::Params, OperatorError>;

    /// Issues the event's transaction. Must not touch anything but `txn`.
    fn state_access(&self, params: &Self::Params, txn: &mut TxnBuilder) -> Result<(), ApiError>;

    /// Consumes the resolved blotter. Rejected blotters reach here too.
    fn post_process(
        &self,
        payload: &Self::Payload,
        blotter: &EventBlotter<Self::Params>,
    ) -> Self::Output;

    /// Output for an event whose `pre_process` failed. No blotter exists
    /// for such an event.
    fn failed(&self, payload: &Self::Payload, error: &OperatorError) -> Self::Output;

    fn operator_id(&self, _payload: &Self::Payload) -> OperatorId {
        OperatorId(0)
    }
}

/// Runs `pre_process` and `state_access` for one event.
pub fn build_transaction<L: OperatorLogic>(
    logic: &L,
    ts: Timestamp,
    seq: u64,
    payload: &L::Payload,
) -> Result<(L::Params, StateTransaction), OperatorError> {
    let params = logic.pre_process(ts, payload)?;
    let mut builder = TxnBuilder::new(ts, seq, logic.operator_id(payload));
    logic
        .state_access(&params, &mut builder)
        .map_err(|e| OperatorError(e.to_string()))?;
    Ok((params, builder.finish()))
}
