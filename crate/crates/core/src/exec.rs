//! Single-operation semantics shared by the chain evaluator and the eager
//! schemes. Callers resolve visibility; this only decides the effect.

use crate::api::FunctionRegistry;
use crate::model::{OpKind, Operation};
use crate::store::Value;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Step {
    /// Condition false: the owning transaction aborts.
    Fail,
    Read(Value),
    Write(Value),
    ReadWrite { prior: Value, new: Value },
}

/// `cond_input` is the visible value of the condition state, `target` the
/// visible value of the target and `source` the visible value of a foreign
/// function source.
pub(crate) fn step(
    op: &Operation,
    registry: &FunctionRegistry,
    cond_input: Option<&Value>,
    target: Option<&Value>,
    source: Option<&Value>,
) -> Step {
    if let (Some(c), Some(v)) = (&op.cond, cond_input) {
        if !registry.check(c.cfun, v, &c.args) {
            return Step::Fail;
        }
    }
    match op.kind {
        OpKind::Read => Step::Read(target.expect("read needs target").clone()),
        OpKind::Write => Step::Write(op.value.clone().expect("write carries a value")),
        OpKind::ReadModify => {
            let prior = target.expect("read-modify needs target").clone();
            let f = op.fun.as_ref().expect("read-modify carries a function");
            let input = source.unwrap_or(&prior);
            let new = registry.apply(f.fun, input, &f.args);
            Step::ReadWrite { prior, new }
        }
    }
}
