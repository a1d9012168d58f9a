//! Anytime best-first search for net-benefit problems.
//!
//! The first pass is greedy on the estimated remaining cost. Each following
//! pass is a weighted A* with a smaller weight that stops at its first
//! improving solution (restarting weighted A*); the weight settles at 1.
//! Every pass prunes nodes whose admissible bound (path cost, h_max on the
//! hard goals, and the penalty of soft goals already lost) cannot beat the
//! incumbent, so a pass that empties its open list proves the incumbent
//! optimal.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use fixedbitset::FixedBitSet;
use indexmap::IndexSet;

use super::heuristic::{Estimate, Relaxation};
use super::task::Task;
use super::PlannerConfig;

const WEIGHTS: [Option<i64>; 5] = [None, Some(5), Some(3), Some(2), Some(1)];
const NONE: u32 = u32::MAX;

pub(crate) struct SearchOutcome {
    /// Task action indices of the best plan found.
    pub plan: Option<Vec<u32>>,
    /// Scaled objective of `plan`.
    pub objective: i64,
    pub nodes_expanded: u64,
    /// True when the search space under the bound was exhausted.
    pub exhausted: bool,
    /// Scaled objective of every incumbent, in the order found.
    pub incumbents: Vec<i64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    f: i64,
    h: u32,
    open_soft: u32,
    seq: u64,
}

struct Budget {
    start: Instant,
    time_limit: f64,
    node_limit: u64,
    expanded: u64,
}

impl Budget {
    fn exhausted(&self) -> bool {
        if self.expanded >= self.node_limit {
            return true;
        }
        self.expanded.is_multiple_of(128) && self.start.elapsed().as_secs_f64() >= self.time_limit
    }
}

pub(crate) fn anytime_search(task: &Task, cfg: &PlannerConfig, start: Instant) -> SearchOutcome {
    let mut relax = Relaxation::new(task);
    let mut states: IndexSet<FixedBitSet> = IndexSet::new();
    let mut estimates: Vec<Estimate> = Vec::new();
    let mut budget = Budget {
        start,
        time_limit: cfg.time_budget_secs,
        node_limit: cfg.node_budget,
        expanded: 0,
    };
    let horizon = cfg.max_plan_len.map(|l| l as u32).unwrap_or(u32::MAX);

    let (root, _) = states.insert_full(task.init.clone());
    estimates.push(relax.estimate(task, &task.init, cfg.heuristic));

    let mut best: Option<Vec<u32>> = None;
    let mut best_obj = i64::MAX;
    let mut incumbents = Vec::new();

    if !estimates[root].alive {
        return SearchOutcome {
            plan: None,
            objective: best_obj,
            nodes_expanded: 0,
            exhausted: true,
            incumbents,
        };
    }
    if task.is_goal(&task.init) {
        best_obj = task.penalty(&task.init);
        best = Some(Vec::new());
        incumbents.push(best_obj);
    }

    let mut pass = 0;
    while cfg.anytime || best.is_none() {
        let weight = WEIGHTS[pass.min(WEIGHTS.len() - 1)];
        let result = run_pass(
            task,
            cfg,
            &mut relax,
            &mut states,
            &mut estimates,
            &mut budget,
            weight,
            horizon,
            best_obj,
        );
        match result {
            Pass::Improved(plan, obj) => {
                best_obj = obj;
                best = Some(plan);
                incumbents.push(obj);
            }
            Pass::Exhausted => {
                return SearchOutcome {
                    plan: best,
                    objective: best_obj,
                    nodes_expanded: budget.expanded,
                    exhausted: true,
                    incumbents,
                };
            }
            Pass::OutOfBudget => break,
        }
        pass += 1;
    }
    SearchOutcome {
        plan: best,
        objective: best_obj,
        nodes_expanded: budget.expanded,
        exhausted: false,
        incumbents,
    }
}

enum Pass {
    Improved(Vec<u32>, i64),
    Exhausted,
    OutOfBudget,
}

#[allow(clippy::too_many_arguments)]
fn run_pass(
    task: &Task,
    cfg: &PlannerConfig,
    relax: &mut Relaxation,
    states: &mut IndexSet<FixedBitSet>,
    estimates: &mut Vec<Estimate>,
    budget: &mut Budget,
    weight: Option<i64>,
    horizon: u32,
    incumbent: i64,
) -> Pass {
    let w = task.w_len;
    let key_of = |g: u32, e: &Estimate, seq: u64| {
        let f = match weight {
            None => w * e.h as i64 + e.residual,
            Some(k) => w * (g as i64 + k * e.h as i64) + e.residual,
        };
        Key {
            f,
            h: e.h,
            open_soft: e.open_soft,
            seq,
        }
    };
    let bound = |g: u32, e: &Estimate| w * (g as i64 + e.h_max as i64) + e.residual;

    // per-pass bookkeeping, indexed by state id
    let mut g_best: Vec<u32> = vec![NONE; states.len()];
    let mut parent: Vec<(u32, u32)> = vec![(NONE, NONE); states.len()];
    let mut heap: BinaryHeap<Reverse<(Key, u32, u32)>> = BinaryHeap::new();
    let mut seq = 0u64;

    g_best[0] = 0;
    heap.push(Reverse((key_of(0, &estimates[0], seq), 0, 0)));

    while let Some(Reverse((_, id, g))) = heap.pop() {
        let id = id as usize;
        if g > g_best[id] {
            continue;
        }
        if bound(g, &estimates[id]) >= incumbent || g >= horizon {
            continue;
        }
        if budget.exhausted() {
            return Pass::OutOfBudget;
        }
        budget.expanded += 1;

        let state = states.get_index(id).unwrap().clone();
        for (ai, action) in task.actions.iter().enumerate() {
            if !task.applicable(&state, action) {
                continue;
            }
            let child = task.successor(&state, action);
            let cg = g + 1;
            let (cid, fresh) = states.insert_full(child);
            if fresh {
                let e = relax.estimate(task, states.get_index(cid).unwrap(), cfg.heuristic);
                estimates.push(e);
            }
            if cid >= g_best.len() {
                g_best.resize(cid + 1, NONE);
                parent.resize(cid + 1, (NONE, NONE));
            }
            if cg >= g_best[cid] {
                continue;
            }
            let e = estimates[cid];
            if !e.alive {
                continue;
            }
            g_best[cid] = cg;
            parent[cid] = (id as u32, ai as u32);

            let child_state = states.get_index(cid).unwrap();
            if task.is_goal(child_state) {
                let obj = w * cg as i64 + task.penalty(child_state);
                if obj < incumbent {
                    return Pass::Improved(trace_back(&parent, cid), obj);
                }
            }
            seq += 1;
            heap.push(Reverse((key_of(cg, &e, seq), cid as u32, cg)));
        }
    }
    Pass::Exhausted
}

fn trace_back(parent: &[(u32, u32)], mut id: usize) -> Vec<u32> {
    let mut plan = Vec::new();
    while parent[id].0 != NONE {
        let (p, a) = parent[id];
        plan.push(a);
        id = p as usize;
    }
    plan.reverse();
    plan
}
