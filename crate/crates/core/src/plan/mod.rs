//! Plan execution, validation, plan differences and commitment extraction.

mod commitments;
mod diff;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::pddl::{ActionSig, Domain, GroundAction, GroundAtom, Problem, State};
use crate::Cost;

pub use commitments::{extract_commitments, honored_commitments, Commitment};
pub use diff::{plan_diff, plan_diff_multiset, PlanDiffMetrics};

/// An ordered sequence of ground actions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan(pub Vec<GroundAction>);

impl Plan {
    pub fn new(steps: Vec<GroundAction>) -> Self {
        Plan(steps)
    }

    pub fn steps(&self) -> &[GroundAction] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signatures(&self) -> impl Iterator<Item = ActionSig> + '_ {
        self.0.iter().map(GroundAction::sig)
    }

    /// The steps from `start` on, as a plan of its own.
    pub fn suffix(&self, start: usize) -> Plan {
        Plan(self.0[start.min(self.0.len())..].to_vec())
    }

    pub fn prefix(&self, len: usize) -> Plan {
        Plan(self.0[..len.min(self.0.len())].to_vec())
    }

    /// Reads the plan file format: one `(name arg...)` per line, `;`
    /// comments. Leading step labels such as `0:` and trailing annotations
    /// such as `[1]` are ignored so that common planner output loads as is.
    pub fn parse(text: &str, domain: &Domain, problem: &Problem) -> Result<Plan, PlanFileError> {
        let mut steps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(';').next().unwrap_or("");
            let Some(open) = line.find('(') else {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(PlanFileError::Syntax {
                    line: lineno + 1,
                    msg: format!("expected `(action args...)`, found `{}`", line.trim()),
                });
            };
            let close = line[open..].find(')').map(|c| open + c).ok_or(PlanFileError::Syntax {
                line: lineno + 1,
                msg: "missing `)`".into(),
            })?;
            let mut tokens = line[open + 1..close].split_whitespace().map(str::to_ascii_lowercase);
            let name = tokens.next().ok_or(PlanFileError::Syntax {
                line: lineno + 1,
                msg: "empty action".into(),
            })?;
            let args: Vec<String> = tokens.collect();
            steps.push(instantiate(domain, problem, &name, &args).map_err(|msg| {
                PlanFileError::Semantic {
                    line: lineno + 1,
                    msg,
                }
            })?);
        }
        Ok(Plan(steps))
    }

    /// Writes the plan file format.
    pub fn to_file_string(&self) -> String {
        self.0.iter().map(|a| format!("{a}\n")).collect()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            writeln!(f, "{i}: {a}")?;
        }
        Ok(())
    }
}

/// Builds the ground action `name(args)`, checking arity and argument types.
pub fn instantiate(
    domain: &Domain,
    problem: &Problem,
    name: &str,
    args: &[String],
) -> Result<GroundAction, String> {
    let schema = domain
        .action(name)
        .ok_or_else(|| format!("unknown action `{name}`"))?;
    if schema.params.len() != args.len() {
        return Err(format!(
            "`{name}` takes {} arguments, got {}",
            schema.params.len(),
            args.len()
        ));
    }
    for (arg, p) in args.iter().zip(&schema.params) {
        let ty = problem
            .objects
            .get(arg)
            .ok_or_else(|| format!("undeclared object `{arg}`"))?;
        if !domain.types.is_subtype(ty, &p.ty) {
            return Err(format!("`{arg}` is a `{ty}`, `{name}` expects `{}`", p.ty));
        }
    }
    Ok(schema.instantiate(args))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanFileError {
    #[error("plan line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("plan line {line}: {msg}")]
    Semantic { line: usize, msg: String },
}

/// Preconditions of a ground action that did not hold.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{action} is not applicable: missing {}", fmt_atoms(.missing))]
pub struct PreconditionError {
    pub action: String,
    pub missing: Vec<GroundAtom>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("step {index}: {source}")]
pub struct StepFailure {
    pub index: usize,
    #[source]
    pub source: PreconditionError,
}

fn fmt_atoms(atoms: &[GroundAtom]) -> String {
    atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}

/// STRIPS transition: (s \ del) ∪ add.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, PreconditionError> {
    let missing: Vec<GroundAtom> = action.pre.iter().filter(|p| !state.contains(p)).cloned().collect();
    if !missing.is_empty() {
        return Err(PreconditionError {
            action: action.to_string(),
            missing,
        });
    }
    let mut next: State = state.difference(&action.del).cloned().collect();
    next.extend(action.add.iter().cloned());
    Ok(next)
}

/// States s_0..s_n visited by a plan, s_0 being the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTrace(pub Vec<State>);

impl StateTrace {
    pub fn states(&self) -> &[State] {
        &self.0
    }

    pub fn last(&self) -> &State {
        self.0.last().expect("a trace always holds the initial state")
    }

    /// True when `atom` holds in at least one state of the trace.
    pub fn ever_holds(&self, atom: &GroundAtom) -> bool {
        self.0.iter().any(|s| s.contains(atom))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn simulate(problem: &Problem, plan: &Plan) -> Result<StateTrace, StepFailure> {
    simulate_from(&problem.init, plan)
}

pub fn simulate_from(init: &State, plan: &Plan) -> Result<StateTrace, StepFailure> {
    let mut states = Vec::with_capacity(plan.len() + 1);
    states.push(init.clone());
    for (index, a) in plan.steps().iter().enumerate() {
        let next = apply(states.last().unwrap(), a).map_err(|source| StepFailure { index, source })?;
        states.push(next);
    }
    Ok(StateTrace(states))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub failure: Option<StepFailure>,
    pub unmet_hard_goals: BTreeSet<GroundAtom>,
    /// Names of soft goals whose atom never holds along the trace.
    pub unsatisfied_soft_goals: BTreeSet<String>,
    pub penalty_sum: Cost,
}

/// Checks executability and hard goals; scores soft goals with achievement
/// semantics (satisfied iff the atom holds in some trace state).
pub fn validate(problem: &Problem, plan: &Plan) -> Validation {
    match simulate(problem, plan) {
        Err(f) => Validation {
            valid: false,
            failure: Some(f),
            unmet_hard_goals: problem.hard_goals.clone(),
            unsatisfied_soft_goals: problem.soft_goals.keys().cloned().collect(),
            penalty_sum: problem.total_penalty(),
        },
        Ok(trace) => {
            let last = trace.last();
            let unmet: BTreeSet<GroundAtom> = problem
                .hard_goals
                .iter()
                .filter(|g| !last.contains(g))
                .cloned()
                .collect();
            let mut unsatisfied = BTreeSet::new();
            let mut penalty = Cost::from_integer(0);
            for g in problem.soft_goals.values() {
                if !trace.ever_holds(&g.atom) {
                    unsatisfied.insert(g.name.clone());
                    penalty += g.penalty;
                }
            }
            Validation {
                valid: unmet.is_empty(),
                failure: None,
                unmet_hard_goals: unmet,
                unsatisfied_soft_goals: unsatisfied,
                penalty_sum: penalty,
            }
        }
    }
}
