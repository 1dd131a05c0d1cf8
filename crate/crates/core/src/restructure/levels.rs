//! Chain-level dependency resolution.
//!
//! Chain A depends on chain B when one of A's operations reads B's state.
//! Chains are layered so that every chain only reads from chains in lower
//! layers. Strongly connected components (mutual dependencies) are
//! collapsed into a single task whose operations run sequentially in
//! timestamp order.

use rustc_hash::FxHashMap as HashMap;
use std::ops::Range;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use smallvec::{smallvec, SmallVec};

use crate::model::{Operation, StateRef};
use crate::restructure::chain::OperationChain;
use crate::store::VersionedRecord;

/// One state owned by a task during evaluation.
#[derive(Debug)]
pub struct TaskState {
    pub state: StateRef,
    pub multiversion: bool,
    pub record: Option<VersionedRecord>,
}

/// Unit of parallel work: a single chain, or a merged cycle of chains.
#[derive(Debug)]
pub struct Task {
    pub states: SmallVec<[TaskState; 1]>,
    /// `(operation, index into states)` in `(ts, position)` order.
    pub ops: Vec<(Operation, u16)>,
    pub level: usize,
    pub pool: usize,
}

impl Task {
    pub fn local(&self, state: StateRef) -> Option<usize> {
        self.states.iter().position(|s| s.state == state)
    }

    pub fn is_merged(&self) -> bool {
        self.states.len() > 1
    }
}

#[derive(Debug, Default)]
pub struct DependencyLevels {
    /// Tasks sorted by level.
    pub tasks: Vec<Task>,
    /// `tasks[levels[k].clone()]` is level `k`.
    pub levels: Vec<Range<usize>>,
    /// States of each merged cycle.
    pub merged_components: Vec<Vec<StateRef>>,
    /// Where each state lives: `(task index, state index)`.
    pub index: HashMap<StateRef, (usize, usize)>,
}

impl DependencyLevels {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn op_count(&self) -> usize {
        self.tasks.iter().map(|t| t.ops.len()).sum()
    }

    pub fn level(&self, k: usize) -> &[Task] {
        &self.tasks[self.levels[k].clone()]
    }
}

fn index_of(tasks: &[Task]) -> HashMap<StateRef, (usize, usize)> {
    let mut index = HashMap::with_capacity_and_hasher(tasks.len(), Default::default());
    for (ti, t) in tasks.iter().enumerate() {
        for (si, s) in t.states.iter().enumerate() {
            index.insert(s.state, (ti, si));
        }
    }
    index
}

pub fn build_levels(chains: Vec<OperationChain>) -> DependencyLevels {
    if chains.is_empty() {
        return DependencyLevels::default();
    }
    if chains.iter().all(|c| c.dep_targets.is_empty()) {
        let tasks: Vec<Task> = chains
            .into_iter()
            .map(|c| Task {
                states: smallvec![TaskState {
                    state: c.state,
                    multiversion: c.is_dependency_source,
                    record: None,
                }],
                ops: c.ops.into_iter().map(|op| (op, 0)).collect(),
                level: 0,
                pool: c.pool,
            })
            .collect();
        return DependencyLevels {
            levels: vec![0..tasks.len()],
            index: index_of(&tasks),
            tasks,
            merged_components: Vec::new(),
        };
    }
    let mut graph: DiGraph<usize, ()> = DiGraph::with_capacity(chains.len(), 0);
    let nodes: Vec<NodeIndex> = (0..chains.len()).map(|i| graph.add_node(i)).collect();
    let by_state: HashMap<StateRef, usize> = chains
        .iter()
        .enumerate()
        .map(|(i, c)| (c.state, i))
        .collect();
    for (i, chain) in chains.iter().enumerate() {
        for dep in &chain.dep_targets {
            let j = *by_state
                .get(dep)
                .expect("decomposition creates a chain for every dependency target");
            if i != j {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }

    // Components come out in reverse topological order: every component a
    // given one depends on appears before it.
    let sccs = tarjan_scc(&graph);
    let mut comp_of = vec![0usize; chains.len()];
    for (c, scc) in sccs.iter().enumerate() {
        for n in scc {
            comp_of[graph[*n]] = c;
        }
    }
    let mut comp_level = vec![0usize; sccs.len()];
    for (c, scc) in sccs.iter().enumerate() {
        let mut level = 0;
        for n in scc {
            for dep in graph.neighbors(*n) {
                let d = comp_of[graph[dep]];
                if d != c {
                    debug_assert!(d < c);
                    level = level.max(comp_level[d] + 1);
                }
            }
        }
        comp_level[c] = level;
    }

    let mut chains: Vec<Option<OperationChain>> = chains.into_iter().map(Some).collect();
    let mut merged_components = Vec::new();
    let mut tasks: Vec<Task> = Vec::with_capacity(sccs.len());
    for (c, scc) in sccs.iter().enumerate() {
        let mut members: Vec<OperationChain> = scc
            .iter()
            .map(|n| chains[graph[*n]].take().expect("chain used once"))
            .collect();
        members.sort_by_key(|m| m.state);
        let pool = members[0].pool;
        let states: SmallVec<[TaskState; 1]> = members
            .iter()
            .map(|m| TaskState {
                state: m.state,
                multiversion: m.is_dependency_source,
                record: None,
            })
            .collect();
        let mut ops: Vec<(Operation, u16)> = Vec::new();
        for (i, m) in members.into_iter().enumerate() {
            ops.extend(m.ops.into_iter().map(|op| (op, i as u16)));
        }
        if states.len() > 1 {
            ops.sort_by_key(|(op, _)| (op.ts, op.pos));
            merged_components.push(states.iter().map(|s| s.state).collect());
        }
        tasks.push(Task {
            states,
            ops,
            level: comp_level[c],
            pool,
        });
    }

    tasks.sort_by_key(|t| t.level);
    let depth = tasks.last().map_or(0, |t| t.level + 1);
    let mut levels = Vec::with_capacity(depth);
    let mut start = 0;
    for k in 0..depth {
        let end = start + tasks[start..].iter().take_while(|t| t.level == k).count();
        levels.push(start..end);
        start = end;
    }
    DependencyLevels {
        index: index_of(&tasks),
        tasks,
        levels,
        merged_components,
    }
}
