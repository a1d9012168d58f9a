//! Replanning constraints and their compilation into soft goals.
//!
//! Each replanning model turns the previous plan into a constraint set:
//! nothing (restart), the old plan's ground actions (similarity), or the
//! commitment-relevant atoms the old plan achieves (commitments). The
//! similarity and commitment sets are compiled into the perturbed problem as
//! marker fluents that instrumented action copies add and never delete, with
//! one penalized soft goal per constraint.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{ActionSchema, ActionSig, AtomTemplate, Domain, GroundAtom, Metric, PredicateSchema, Problem, SoftGoal};
use crate::plan::{extract_commitments, instantiate, simulate, Commitment, Plan, StepFailure};
use crate::Cost;

/// Suffix appended to an action name for its instrumented copy.
pub const COPY_SUFFIX: &str = "-marked";
pub const EXECUTED_SUFFIX: &str = "-executed";
pub const ACHIEVED_SUFFIX: &str = "-achieved";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplanModel {
    /// Plan from scratch; the old plan imposes nothing.
    Restart,
    /// Keep as many of the old plan's ground actions as possible.
    Similarity,
    /// Re-achieve the commitments the old plan made.
    Commitment,
}

impl ReplanModel {
    pub const ALL: [ReplanModel; 3] = [ReplanModel::Restart, ReplanModel::Similarity, ReplanModel::Commitment];

    pub fn as_str(self) -> &'static str {
        match self {
            ReplanModel::Restart => "restart",
            ReplanModel::Similarity => "similarity",
            ReplanModel::Commitment => "commitment",
        }
    }
}

impl fmt::Display for ReplanModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReplanModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "restart" => Ok(ReplanModel::Restart),
            "similarity" => Ok(ReplanModel::Similarity),
            "commitment" => Ok(ReplanModel::Commitment),
            other => Err(format!("unknown replanning model `{other}`")),
        }
    }
}

/// Which part of the old plan similarity constraints (and diff metrics)
/// refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintScope {
    /// Only the actions that were not executed before the perturbation.
    #[default]
    Suffix,
    Full,
}

impl ConstraintScope {
    /// The portion of `plan` this scope covers.
    pub fn select(self, plan: &Plan, executed: usize) -> Plan {
        match self {
            ConstraintScope::Suffix => plan.suffix(executed),
            ConstraintScope::Full => plan.clone(),
        }
    }
}

impl FromStr for ConstraintScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "suffix" => Ok(ConstraintScope::Suffix),
            "full" => Ok(ConstraintScope::Full),
            other => Err(format!("unknown scope `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityConstraint {
    pub action: ActionSig,
    pub penalty: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentConstraint {
    pub commitment: Commitment,
    pub penalty: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSet {
    Empty,
    ActionSimilarity(Vec<SimilarityConstraint>),
    Commitments(Vec<CommitmentConstraint>),
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        match self {
            ConstraintSet::Empty => 0,
            ConstraintSet::ActionSimilarity(v) => v.len(),
            ConstraintSet::Commitments(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintOptions {
    pub scope: ConstraintScope,
    /// Penalty given to every constraint.
    pub penalty: Cost,
    pub commitment_predicates: BTreeSet<String>,
}

impl Default for ConstraintOptions {
    fn default() -> Self {
        ConstraintOptions {
            scope: ConstraintScope::Suffix,
            penalty: Cost::from_integer(1),
            commitment_predicates: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("executed prefix of {executed} steps exceeds the old plan's {len} steps")]
    PrefixTooLong { executed: usize, len: usize },
    #[error("old plan does not execute: {0}")]
    Simulation(#[from] StepFailure),
    #[error("constraint refers to unknown action `{0}`")]
    UnknownAction(String),
    #[error("commitment predicate `{0}` is not declared in the domain")]
    UnknownPredicate(String),
    #[error("constraint refers to undeclared object `{0}`")]
    UnknownObject(String),
    #[error("generated name `{0}` collides with an existing declaration")]
    NameCollision(String),
    #[error("expected {expected} constraints")]
    WrongConstraintKind { expected: &'static str },
    #[error("plan step `{0}` cannot be mapped between compiled and original problem: {1}")]
    Mapping(String, String),
}

/// Builds ψ for `model` from the old plan. `problem` is the problem the old
/// plan was made for; the first `executed` steps were carried out.
pub fn build_constraints(
    model: ReplanModel,
    problem: &Problem,
    old_plan: &Plan,
    executed: usize,
    opts: &ConstraintOptions,
) -> Result<ConstraintSet, CompileError> {
    if executed > old_plan.len() {
        return Err(CompileError::PrefixTooLong {
            executed,
            len: old_plan.len(),
        });
    }
    simulate(problem, &old_plan.prefix(executed))?;
    Ok(match model {
        ReplanModel::Restart => ConstraintSet::Empty,
        ReplanModel::Similarity => {
            let scoped = opts.scope.select(old_plan, executed);
            let mut seen = BTreeSet::new();
            ConstraintSet::ActionSimilarity(
                scoped
                    .signatures()
                    .filter(|s| seen.insert(s.clone()))
                    .map(|action| SimilarityConstraint {
                        action,
                        penalty: opts.penalty,
                    })
                    .collect(),
            )
        }
        ReplanModel::Commitment => ConstraintSet::Commitments(
            extract_commitments(problem, old_plan, &opts.commitment_predicates)?
                .into_iter()
                .map(|commitment| CommitmentConstraint {
                    commitment,
                    penalty: opts.penalty,
                })
                .collect(),
        ),
    })
}

/// Where a soft goal of a compiled problem came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Already present in the perturbed problem.
    Original,
    Similarity(ActionSig),
    Commitment(Commitment),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledProblem {
    pub model: ReplanModel,
    pub domain: Domain,
    pub problem: Problem,
    /// Soft-goal name to its source constraint; total over `problem.soft_goals`.
    pub provenance: BTreeMap<String, Provenance>,
    /// Instrumented copy name to the action it copies.
    pub instrumented: BTreeMap<String, String>,
}

impl CompiledProblem {
    /// Wraps an uncompiled problem (restart model).
    pub fn identity(domain: &Domain, problem: &Problem) -> Self {
        CompiledProblem {
            model: ReplanModel::Restart,
            domain: domain.clone(),
            problem: problem.clone(),
            provenance: problem
                .soft_goals
                .keys()
                .map(|k| (k.clone(), Provenance::Original))
                .collect(),
            instrumented: BTreeMap::new(),
        }
    }

    /// Name of the original action behind a (possibly instrumented) action.
    pub fn original_name<'a>(&'a self, name: &'a str) -> &'a str {
        self.instrumented.get(name).map(String::as_str).unwrap_or(name)
    }

    /// Maps a plan for the compiled problem back onto the original domain by
    /// replacing instrumented copies with their originals.
    pub fn deinstrument(&self, plan: &Plan, domain: &Domain, problem: &Problem) -> Result<Plan, CompileError> {
        plan.steps()
            .iter()
            .map(|a| {
                instantiate(domain, problem, self.original_name(&a.name), &a.args)
                    .map_err(|e| CompileError::Mapping(a.to_string(), e))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Plan)
    }

    /// Maps a plan for the original problem onto the compiled one, using the
    /// instrumented copy of every action that has one.
    pub fn instrument(&self, plan: &Plan) -> Result<Plan, CompileError> {
        let copy_of: BTreeMap<&str, &str> = self
            .instrumented
            .iter()
            .map(|(copy, orig)| (orig.as_str(), copy.as_str()))
            .collect();
        plan.steps()
            .iter()
            .map(|a| {
                let name = copy_of.get(a.name.as_str()).copied().unwrap_or(&a.name);
                instantiate(&self.domain, &self.problem, name, &a.args)
                    .map_err(|e| CompileError::Mapping(a.to_string(), e))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Plan)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompileOptions {
    /// Add marker effects to the original schemas instead of adding copies.
    pub replace_originals: bool,
}

/// Compiles `cs` into the perturbed problem, dispatching on its kind.
pub fn compile(
    domain: &Domain,
    perturbed: &Problem,
    cs: &ConstraintSet,
    opts: CompileOptions,
) -> Result<CompiledProblem, CompileError> {
    match cs {
        ConstraintSet::Empty => Ok(CompiledProblem::identity(domain, perturbed)),
        ConstraintSet::ActionSimilarity(_) => compile_action_similarity(domain, perturbed, cs, opts),
        ConstraintSet::Commitments(_) => compile_commitments(domain, perturbed, cs, opts),
    }
}

pub fn compile_action_similarity(
    domain: &Domain,
    perturbed: &Problem,
    cs: &ConstraintSet,
    opts: CompileOptions,
) -> Result<CompiledProblem, CompileError> {
    let ConstraintSet::ActionSimilarity(constraints) = cs else {
        return Err(CompileError::WrongConstraintKind {
            expected: "action-similarity",
        });
    };
    let mut out = CompiledProblem::identity(domain, perturbed);
    out.model = ReplanModel::Similarity;
    if constraints.is_empty() {
        return Ok(out);
    }

    let lifted: BTreeSet<&str> = constraints.iter().map(|c| c.action.name.as_str()).collect();
    for name in &lifted {
        let schema = domain
            .action(name)
            .ok_or_else(|| CompileError::UnknownAction(name.to_string()))?
            .clone();
        let marker = format!("{name}{EXECUTED_SUFFIX}");
        declare_marker(&mut out.domain, &marker, schema.params.iter().map(|p| (p.name.clone(), p.ty.clone())))?;
        let effect = AtomTemplate {
            predicate: marker,
            args: schema.params.iter().map(|p| p.name.clone()).collect(),
        };
        add_instrumented(&mut out, domain, &schema, vec![effect], opts)?;
    }

    for c in constraints {
        check_objects(perturbed, &c.action.args)?;
        let atom = GroundAtom {
            predicate: format!("{}{EXECUTED_SUFFIX}", c.action.name),
            args: c.action.args.clone(),
        };
        add_soft_goal(&mut out, "keep", atom, c.penalty, Provenance::Similarity(c.action.clone()));
    }
    finish(&mut out);
    Ok(out)
}

pub fn compile_commitments(
    domain: &Domain,
    perturbed: &Problem,
    cs: &ConstraintSet,
    opts: CompileOptions,
) -> Result<CompiledProblem, CompileError> {
    let ConstraintSet::Commitments(constraints) = cs else {
        return Err(CompileError::WrongConstraintKind { expected: "commitment" });
    };
    let mut out = CompiledProblem::identity(domain, perturbed);
    out.model = ReplanModel::Commitment;
    if constraints.is_empty() {
        return Ok(out);
    }

    let preds: BTreeSet<&str> = constraints
        .iter()
        .map(|c| c.commitment.atom.predicate.as_str())
        .collect();
    for p in &preds {
        let schema: &PredicateSchema = domain
            .predicate(p)
            .ok_or_else(|| CompileError::UnknownPredicate(p.to_string()))?;
        declare_marker(
            &mut out.domain,
            &format!("{p}{ACHIEVED_SUFFIX}"),
            schema.params.iter().map(|q| (q.name.clone(), q.ty.clone())),
        )?;
    }
    for schema in &domain.actions {
        let effects: Vec<AtomTemplate> = schema
            .add
            .iter()
            .filter(|t| preds.contains(t.predicate.as_str()))
            .map(|t| AtomTemplate {
                predicate: format!("{}{ACHIEVED_SUFFIX}", t.predicate),
                args: t.args.clone(),
            })
            .collect();
        if !effects.is_empty() {
            add_instrumented(&mut out, domain, schema, effects, opts)?;
        }
    }

    for c in constraints {
        let atom = &c.commitment.atom;
        check_objects(perturbed, &atom.args)?;
        let marker = GroundAtom {
            predicate: format!("{}{ACHIEVED_SUFFIX}", atom.predicate),
            args: atom.args.clone(),
        };
        if perturbed.init.contains(atom) {
            out.problem.init.insert(marker.clone());
        }
        add_soft_goal(&mut out, "commit", marker, c.penalty, Provenance::Commitment(c.commitment.clone()));
    }
    finish(&mut out);
    Ok(out)
}

/// Turns a compiled problem into its PDDL3 form: every soft goal is a named
/// simple preference and the metric minimizes the penalty-weighted sum of
/// violations.
pub fn to_preferences(cp: &CompiledProblem) -> Problem {
    let mut p = cp.problem.clone();
    p.metric = if p.soft_goals.is_empty() {
        Metric::PlanLength
    } else {
        Metric::PenaltySum
    };
    p
}

fn declare_marker(
    domain: &mut Domain,
    name: &str,
    params: impl Iterator<Item = (String, String)>,
) -> Result<(), CompileError> {
    if domain.predicate(name).is_some() {
        return Err(CompileError::NameCollision(name.to_string()));
    }
    domain.predicates.push(PredicateSchema {
        name: name.to_string(),
        params: params.map(|(n, t)| crate::pddl::TypedParam::new(n, t)).collect(),
    });
    Ok(())
}

fn add_instrumented(
    out: &mut CompiledProblem,
    original: &Domain,
    schema: &ActionSchema,
    effects: Vec<AtomTemplate>,
    opts: CompileOptions,
) -> Result<(), CompileError> {
    if opts.replace_originals {
        let a = out
            .domain
            .actions
            .iter_mut()
            .find(|a| a.name == schema.name)
            .expect("schema comes from the same domain");
        a.add.extend(effects);
        return Ok(());
    }
    let copy_name = format!("{}{COPY_SUFFIX}", schema.name);
    if original.action(&copy_name).is_some() || out.domain.action(&copy_name).is_some() {
        return Err(CompileError::NameCollision(copy_name));
    }
    let mut copy = schema.clone();
    copy.name = copy_name.clone();
    copy.add.extend(effects);
    out.domain.actions.push(copy);
    out.instrumented.insert(copy_name, schema.name.clone());
    Ok(())
}

fn add_soft_goal(out: &mut CompiledProblem, prefix: &str, atom: GroundAtom, penalty: Cost, source: Provenance) {
    let mut i = out.provenance.len();
    let name = loop {
        let candidate = format!("{prefix}{i}");
        if !out.problem.soft_goals.contains_key(&candidate) {
            break candidate;
        }
        i += 1;
    };
    out.problem.soft_goals.insert(
        name.clone(),
        SoftGoal {
            name: name.clone(),
            atom,
            penalty,
        },
    );
    out.provenance.insert(name, source);
}

fn check_objects(problem: &Problem, args: &[String]) -> Result<(), CompileError> {
    match args.iter().find(|a| !problem.objects.contains_key(*a)) {
        Some(a) => Err(CompileError::UnknownObject(a.clone())),
        None => Ok(()),
    }
}

fn finish(out: &mut CompiledProblem) {
    if !out.domain.requirements.iter().any(|r| r == ":preferences") {
        out.domain.requirements.push(":preferences".to_string());
    }
    if out.problem.metric == Metric::PlanLength {
        out.problem.metric = Metric::PenaltySum;
    }
}
