//! Net-benefit planning over compiled problems: an embedded anytime
//! forward search, a brute-force oracle for tiny problems, and a bridge to
//! external preference planners.

mod brute;
mod external;
mod heuristic;
mod search;
mod task;

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::CompiledProblem;
use crate::pddl::{ActionSig, GroundAction};
use crate::plan::Plan;
use crate::Cost;

pub use brute::{brute_force, BruteForceError, NODE_GUARD};
pub use external::{solve_external, ExternalError, SCRATCH_ENV};

use task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    /// FF-style relaxed plan length.
    #[default]
    RelaxedPlan,
    /// Number of open goals.
    GoalCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub time_budget_secs: f64,
    pub node_budget: u64,
    /// Cost of one action relative to one unit of penalty.
    #[serde(with = "crate::cost_text")]
    pub w_len: Cost,
    pub heuristic: HeuristicKind,
    /// Keep improving after the first solution until the budget runs out.
    pub anytime: bool,
    /// Non-zero seeds shuffle the action order, which changes tie-breaking.
    pub seed: u64,
    /// Only consider plans up to this length.
    pub max_plan_len: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            time_budget_secs: 60.0,
            node_budget: 2_000_000,
            w_len: Cost::new(1, 100),
            heuristic: HeuristicKind::RelaxedPlan,
            anytime: true,
            seed: 0,
            max_plan_len: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    /// The search space under the incumbent was exhausted.
    OptimalForBudget,
    /// A plan was found but the budget ran out before it could be proven
    /// optimal.
    Satisficing,
    Timeout,
    Unsolvable,
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanStatus::OptimalForBudget => "optimal-for-budget",
            PlanStatus::Satisficing => "satisficing",
            PlanStatus::Timeout => "timeout",
            PlanStatus::Unsolvable => "unsolvable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub plan: Option<Plan>,
    pub penalty_sum: Cost,
    pub plan_length: usize,
    /// w_len * plan_length + penalty_sum.
    pub objective: Cost,
    pub wall_time_ms: u128,
    pub nodes_expanded: u64,
    pub status: PlanStatus,
    /// Objective of each successive incumbent.
    pub incumbents: Vec<Cost>,
}

impl PlanResult {
    pub(crate) fn without_plan(status: PlanStatus, start: Instant, nodes: u64) -> Self {
        PlanResult {
            plan: None,
            penalty_sum: Cost::from_integer(0),
            plan_length: 0,
            objective: Cost::from_integer(0),
            wall_time_ms: start.elapsed().as_millis(),
            nodes_expanded: nodes,
            status,
            incumbents: Vec::new(),
        }
    }
}

/// Searches for a plan minimizing w_len * length + unachieved penalties.
/// Hard goals are never traded away.
pub fn solve(cp: &CompiledProblem, cfg: &PlannerConfig) -> PlanResult {
    let start = Instant::now();
    let task = Task::build(&cp.domain, &cp.problem, cfg.w_len, cfg.seed);
    let out = search::anytime_search(&task, cfg, start);

    let Some(steps) = out.plan else {
        let status = if out.exhausted {
            PlanStatus::Unsolvable
        } else {
            PlanStatus::Timeout
        };
        return PlanResult::without_plan(status, start, out.nodes_expanded);
    };
    let plan = Plan(steps.iter().map(|&a| task.ground[a as usize].clone()).collect());
    let len = plan.len();
    let objective = task.unscale(out.objective);
    PlanResult {
        penalty_sum: objective - cfg.w_len * Cost::from_integer(len as i64),
        plan_length: len,
        objective,
        wall_time_ms: start.elapsed().as_millis(),
        nodes_expanded: out.nodes_expanded,
        status: if out.exhausted {
            PlanStatus::OptimalForBudget
        } else {
            PlanStatus::Satisficing
        },
        incumbents: out.incumbents.iter().map(|&v| task.unscale(v)).collect(),
        plan: Some(plan),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvaluateError {
    #[error("step {0}: `{1}` is not an action of the search task")]
    UnknownAction(usize, String),
    #[error("step {0}: `{1}` is not applicable")]
    NotApplicable(usize, String),
}

/// The ground actions the embedded search chooses from, after relevance and
/// dominance pruning.
pub fn search_actions(cp: &CompiledProblem) -> Vec<GroundAction> {
    Task::build(&cp.domain, &cp.problem, Cost::from_integer(0), 0).ground
}

/// Penalty the embedded search assigns to `plan`, computed on its own
/// state representation.
pub fn search_penalty(cp: &CompiledProblem, plan: &Plan) -> Result<Cost, EvaluateError> {
    let task = Task::build(&cp.domain, &cp.problem, Cost::from_integer(0), 0);
    let index: HashMap<ActionSig, usize> = task.ground.iter().enumerate().map(|(i, a)| (a.sig(), i)).collect();
    let mut state = task.init.clone();
    for (i, step) in plan.steps().iter().enumerate() {
        let a = *index
            .get(&step.sig())
            .ok_or_else(|| EvaluateError::UnknownAction(i, step.to_string()))?;
        let action = &task.actions[a];
        if !task.applicable(&state, action) {
            return Err(EvaluateError::NotApplicable(i, step.to_string()));
        }
        state = task.successor(&state, action);
    }
    Ok(task.unscale(task.penalty(&state)))
}
