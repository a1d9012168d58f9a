//! Exhaustive breadth-first oracle for tiny problems.
//!
//! Deliberately shares no code with the search: it grounds without pruning,
//! keeps its own atom table and scores with exact rationals.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use super::{PlanResult, PlanStatus};
use crate::compile::CompiledProblem;
use crate::pddl::{ground, GroundAtom, GroundOptions};
use crate::plan::Plan;
use crate::Cost;

/// Upper bound on generated nodes.
pub const NODE_GUARD: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BruteForceError {
    #[error("more than {NODE_GUARD} nodes generated")]
    GuardExceeded,
    #[error("no plan of length at most {0}")]
    NoPlanWithinBound(usize),
}

/// Minimum of w_len * length + unachieved penalties over all plans of at most
/// `max_len` steps that reach the hard goals.
pub fn brute_force(cp: &CompiledProblem, max_len: usize, w_len: Cost) -> Result<PlanResult, BruteForceError> {
    let start = Instant::now();
    let problem = &cp.problem;
    let actions = ground(
        &cp.domain,
        problem,
        GroundOptions {
            prune_unreachable: false,
        },
    );

    let mut ids: BTreeMap<&GroundAtom, usize> = BTreeMap::new();
    for a in problem.hard_goals.iter().chain(problem.soft_goals.values().map(|g| &g.atom)) {
        let n = ids.len();
        ids.entry(a).or_insert(n);
    }
    for a in &actions {
        for p in &a.pre {
            let n = ids.len();
            ids.entry(p).or_insert(n);
        }
    }
    let num_atoms = ids.len();
    let soft: Vec<(usize, Cost)> = problem.soft_goals.values().map(|g| (ids[&g.atom], g.penalty)).collect();
    let width = num_atoms + soft.len();
    let project = |atoms: &BTreeSet<GroundAtom>| -> Vec<usize> {
        atoms.iter().filter_map(|a| ids.get(a).copied()).collect()
    };
    let compiled: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> = actions
        .iter()
        .map(|a| (project(&a.pre), project(&a.add), project(&a.del)))
        .collect();
    let hard: Vec<usize> = problem.hard_goals.iter().map(|g| ids[g]).collect();

    let mark_soft = |s: &mut FixedBitSet| {
        for (i, (atom, _)) in soft.iter().enumerate() {
            if s.contains(*atom) {
                s.insert(num_atoms + i);
            }
        }
    };
    let objective = |s: &FixedBitSet, len: usize| -> Cost {
        let mut v = w_len * Cost::from_integer(len as i64);
        for (i, (_, p)) in soft.iter().enumerate() {
            if !s.contains(num_atoms + i) {
                v += *p;
            }
        }
        v
    };

    let mut init = FixedBitSet::with_capacity(width);
    for a in &problem.init {
        if let Some(&i) = ids.get(a) {
            init.insert(i);
        }
    }
    mark_soft(&mut init);

    // parents[id] = (parent id, action index)
    let mut visited: HashSet<FixedBitSet> = HashSet::new();
    let mut parents: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX)];
    let mut best: Option<(Cost, usize)> = None;
    let consider = |s: &FixedBitSet, id: usize, len: usize, best: &mut Option<(Cost, usize)>| {
        if hard.iter().all(|&g| s.contains(g)) {
            let v = objective(s, len);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                *best = Some((v, id));
            }
        }
    };

    visited.insert(init.clone());
    consider(&init, 0, 0, &mut best);
    let mut layer = vec![init];
    let mut layer_ids = vec![0usize];
    let mut generated = 0u64;
    for len in 1..=max_len {
        let mut next = Vec::new();
        let mut next_ids = Vec::new();
        for (s, &sid) in layer.iter().zip(&layer_ids) {
            for (ai, (pre, add, del)) in compiled.iter().enumerate() {
                if !pre.iter().all(|&p| s.contains(p)) {
                    continue;
                }
                generated += 1;
                if generated > NODE_GUARD {
                    return Err(BruteForceError::GuardExceeded);
                }
                let mut t = s.clone();
                for &d in del {
                    t.set(d, false);
                }
                for &x in add {
                    t.insert(x);
                }
                mark_soft(&mut t);
                if visited.contains(&t) {
                    continue;
                }
                let id = parents.len();
                parents.push((sid, ai));
                visited.insert(t.clone());
                consider(&t, id, len, &mut best);
                next.push(t);
                next_ids.push(id);
            }
        }
        layer = next;
        layer_ids = next_ids;
    }

    let Some((value, mut id)) = best else {
        return Err(BruteForceError::NoPlanWithinBound(max_len));
    };
    let mut steps = Vec::new();
    while parents[id].0 != usize::MAX {
        steps.push(actions[parents[id].1].clone());
        id = parents[id].0;
    }
    steps.reverse();
    let len = steps.len();
    Ok(PlanResult {
        plan: Some(Plan(steps)),
        penalty_sum: value - w_len * Cost::from_integer(len as i64),
        plan_length: len,
        objective: value,
        wall_time_ms: start.elapsed().as_millis(),
        nodes_expanded: generated,
        status: PlanStatus::OptimalForBudget,
        incumbents: vec![value],
    })
}
