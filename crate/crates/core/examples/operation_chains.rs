//! What happens to a batch before evaluation: transactions split into
//! per-state chains, chains that read each other's states are ordered into
//! levels, and a mutual read between two states collapses both chains into
//! one task.
//!
//! cargo run --release --example operation_chains

use txstream::api::{Cond, CondId, Fun, FunId, TxnBuilder};
use txstream::model::OperatorId;
use txstream::restructure::{build_levels, ChainPool, PlacementPolicy};
use txstream::{StateRef, TableId, Timestamp};

fn main() {
    let t = TableId(0);
    let pool = ChainPool::new(PlacementPolicy::shared_everything(), 2);

    // ts 1: key 0 += 5
    // ts 2: key 1 += 3 if key 0 >= 1     (chain 1 reads chain 0)
    // ts 3: key 2 += 1 if key 3 >= 1     (2 reads 3)
    // ts 4: key 3 += 1 if key 2 >= 1     (3 reads 2: a cycle)
    let steps: [(u64, Option<u64>); 4] = [(0, None), (1, Some(0)), (2, Some(3)), (3, Some(2))];
    for (i, (key, reads)) in steps.into_iter().enumerate() {
        let ts = i as u64 + 1;
        let mut b = TxnBuilder::new(Timestamp(ts), i as u64, OperatorId(0));
        let cond = reads.map(|r| Cond::new(CondId::AT_LEAST, &[1], t, r));
        b.issue_read_modify(t, key, Fun::new(FunId::ADD, &[ts as i64]), cond)
            .expect("inside state access");
        pool.decompose(b.finish());
    }

    let chains = pool.drain();
    for c in &chains {
        let ts: Vec<u64> = c.ops.iter().map(|o| o.ts.0).collect();
        println!(
            "chain {}  ops at ts {:?}  reads {:?}  read by others: {}",
            c.state, ts, c.dep_targets, c.is_dependency_source
        );
    }

    let levels = build_levels(chains);
    for k in 0..levels.level_count() {
        for task in levels.level(k) {
            let states: Vec<StateRef> = task.states.iter().map(|s| s.state).collect();
            println!("level {k}: task over {states:?}  merged: {}", task.is_merged());
        }
    }
    println!("merged components: {:?}", levels.merged_components);
}
