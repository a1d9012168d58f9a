#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use replan_core::compile::{
    build_constraints, compile, CompileOptions, CompiledProblem, ConstraintOptions, ReplanModel,
};
use replan_core::pddl::{GroundAction, Problem, State};
use replan_core::plan::{apply, Plan};
use replan_core::planner::PlannerConfig;
use replan_core::warehouses::{
    commitment_predicates, warehouse_domain, InstanceSpec, PerturbationKind, Scenario,
};

/// Fast configuration for producing original plans.
pub fn first_solution() -> PlannerConfig {
    PlannerConfig {
        anytime: false,
        ..PlannerConfig::default()
    }
}

/// The first `count` scenarios of each size that can be generated, walking
/// seeds upward and alternating perturbation kinds.
pub fn scenarios(sizes: std::ops::RangeInclusive<usize>, count: usize) -> Vec<Scenario> {
    let cfg = first_solution();
    let mut out = Vec::new();
    for n in sizes {
        let mut found = 0;
        let mut seed = 0u64;
        while found < count {
            assert!(seed < 10 * count as u64 + 20, "too few scenarios of size {n}");
            let kind = [PerturbationKind::Fall, PerturbationKind::Breakdown][seed as usize % 2];
            if let Ok(s) = Scenario::generate(InstanceSpec::new(n, seed), kind, &cfg) {
                out.push(s);
                found += 1;
            }
            seed += 1;
        }
    }
    out
}

pub fn constraint_options() -> ConstraintOptions {
    ConstraintOptions {
        commitment_predicates: commitment_predicates(),
        ..ConstraintOptions::default()
    }
}

/// Compiles the scenario's replanning problem under `model`.
pub fn compiled(s: &Scenario, model: ReplanModel) -> CompiledProblem {
    let cs = build_constraints(model, &s.problem, &s.original_plan, s.prefix_len, &constraint_options()).unwrap();
    compile(&warehouse_domain(), &s.perturbed_problem(), &cs, CompileOptions::default()).unwrap()
}

/// A random executable plan of at most `max_len` steps drawn from
/// `actions`. Stops early at a dead end.
pub fn random_walk(actions: &[GroundAction], init: &State, max_len: usize, rng: &mut ChaCha8Rng) -> Plan {
    let len = rng.gen_range(0..=max_len);
    let mut state = init.clone();
    let mut steps = Vec::new();
    for _ in 0..len {
        let applicable: Vec<&GroundAction> = actions.iter().filter(|a| a.pre.is_subset(&state)).collect();
        let Some(a) = applicable.choose(rng) else { break };
        state = apply(&state, a).unwrap();
        steps.push((*a).clone());
    }
    Plan(steps)
}

/// Gridsquares reachable from the first one over `connected` atoms equal all
/// gridsquares.
pub fn grid_connected(p: &Problem) -> bool {
    let squares: BTreeSet<&str> = p
        .objects
        .iter()
        .filter(|(_, t)| *t == "gridsquare")
        .map(|(o, _)| o.as_str())
        .collect();
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for a in p.init.iter().filter(|a| a.predicate == "connected") {
        adj.entry(&a.args[0]).or_default().push(&a.args[1]);
    }
    let Some(&first) = squares.iter().next() else { return false };
    let mut seen = BTreeSet::from([first]);
    let mut queue = VecDeque::from([first]);
    while let Some(q) = queue.pop_front() {
        for &r in adj.get(q).into_iter().flatten() {
            if seen.insert(r) {
                queue.push_back(r);
            }
        }
    }
    seen == squares
}
