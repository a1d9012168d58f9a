//! The Warehouses benchmark: a fixed domain, a seeded instance generator
//! and the two perturbations (a package falls off its carrier, a carrier
//! breaks down).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::CompiledProblem;
use crate::pddl::{parse_atoms, parse_domain, Domain, GroundAtom, Metric, PddlError, Problem, State};
use crate::plan::{simulate, simulate_from, Plan, PlanFileError};
use crate::planner::{solve, PlannerConfig};

/// Version 1 of the domain file.
pub const DOMAIN_PDDL: &str = include_str!("../../assets/warehouses.pddl");

/// Predicates whose atoms count as commitments to other agents.
pub const COMMITMENT_PREDICATES: [&str; 4] = ["holding", "on", "towing", "delivered"];

pub fn warehouse_domain() -> Domain {
    parse_domain(DOMAIN_PDDL).expect("bundled domain parses")
}

pub fn commitment_predicates() -> BTreeSet<String> {
    COMMITMENT_PREDICATES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub num_packages: usize,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(num_packages: usize, seed: u64) -> Self {
        assert!(num_packages >= 1, "at least one package");
        InstanceSpec { num_packages, seed }
    }

    pub fn forklifts(&self) -> usize {
        self.num_packages.div_ceil(2) + 1
    }

    pub fn transports(&self) -> usize {
        self.num_packages.div_ceil(2)
    }

    pub fn shelves(&self) -> usize {
        self.num_packages
    }

    pub fn gridsquares(&self) -> usize {
        2 * self.num_packages + 4
    }

    pub fn packagers(&self) -> usize {
        self.num_packages.div_ceil(3) + 1
    }

    pub fn name(&self) -> String {
        format!("wh-p{}-s{}", self.num_packages, self.seed)
    }

    /// Generator state; the package count is mixed in so that sizes sharing
    /// a seed still differ.
    fn rng(&self) -> ChaCha8Rng {
        let mixed = self.seed ^ (self.num_packages as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        ChaCha8Rng::seed_from_u64(mixed)
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn atom(pred: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::new(pred, args)
}

/// Random connected gridsquare graph: a random spanning tree plus about
/// |G|/2 extra edges. Edges are returned once, smaller index first.
fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = BTreeSet::new();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert(key(order[i], order[j]));
    }
    let max_edges = n * (n - 1) / 2;
    let extra = n / 2;
    let mut added = 0;
    let mut tries = 0;
    while added < extra && edges.len() < max_edges && tries < 100 * n {
        tries += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && edges.insert(key(a, b)) {
            added += 1;
        }
    }
    edges
}

pub fn generate_instance(spec: InstanceSpec) -> Problem {
    let mut rng = spec.rng();
    let packages = names("p", spec.num_packages);
    let shelves = names("s", spec.shelves());
    let squares = names("g", spec.gridsquares());
    let forklifts = names("f", spec.forklifts());
    let transports = names("t", spec.transports());
    let packagers = names("pk", spec.packagers());

    let mut objects = BTreeMap::new();
    for (list, ty) in [
        (&packages, "package"),
        (&shelves, "shelf"),
        (&squares, "gridsquare"),
        (&forklifts, "forklift"),
        (&transports, "transport"),
        (&packagers, "packager"),
    ] {
        for o in list {
            objects.insert(o.clone(), ty.to_string());
        }
    }
    objects.insert("tow1".into(), "towtruck".into());
    objects.insert("garage1".into(), "garage".into());

    let mut init = State::new();
    for (a, b) in random_graph(squares.len(), &mut rng) {
        init.insert(atom("connected", &[&squares[a], &squares[b]]));
        init.insert(atom("connected", &[&squares[b], &squares[a]]));
    }
    let pick = |rng: &mut ChaCha8Rng, v: &[String]| v[rng.gen_range(0..v.len())].clone();
    for s in &shelves {
        let g = pick(&mut rng, &squares);
        init.insert(atom("accessible", &[s, &g]));
    }
    for p in &packages {
        let s = pick(&mut rng, &shelves);
        init.insert(atom("stocked", &[p, &s]));
    }
    for c in forklifts.iter().chain(&transports) {
        let g = pick(&mut rng, &squares);
        init.insert(atom("at", &[c, &g]));
        init.insert(atom("operational", &[c]));
    }
    for k in &packagers {
        let g = pick(&mut rng, &squares);
        init.insert(atom("packager-at", &[k, &g]));
    }
    let g = pick(&mut rng, &squares);
    init.insert(atom("towtruck-at", &["tow1", &g]));
    let g = pick(&mut rng, &squares);
    init.insert(atom("at-garage", &[&g]));

    Problem {
        name: spec.name(),
        domain: "warehouses".into(),
        objects,
        init,
        hard_goals: packages.iter().map(|p| atom("packaged", &[p])).collect(),
        soft_goals: BTreeMap::new(),
        metric: Metric::PlanLength,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Fall,
    Breakdown,
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbationKind::Fall => "fall",
            PerturbationKind::Breakdown => "breakdown",
        })
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fall" => Ok(PerturbationKind::Fall),
            "breakdown" => Ok(PerturbationKind::Breakdown),
            other => Err(format!("unknown perturbation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    PackageFalls { package: String, gridsquare: String },
    CarrierBreaks { carrier: String },
}

impl Perturbation {
    pub fn kind(&self) -> PerturbationKind {
        match self {
            Perturbation::PackageFalls { .. } => PerturbationKind::Fall,
            Perturbation::CarrierBreaks { .. } => PerturbationKind::Breakdown,
        }
    }

    /// Applies the perturbation to a state, or None if it does not fit.
    pub fn apply(&self, state: &State) -> Option<State> {
        let mut s = state.clone();
        match self {
            Perturbation::PackageFalls { package, gridsquare } => {
                let carried = state
                    .iter()
                    .find(|a| {
                        (a.predicate == "holding" && a.args[1] == *package)
                            || (a.predicate == "on" && a.args[0] == *package)
                    })?
                    .clone();
                s.remove(&carried);
                s.insert(atom("fallen", &[package, gridsquare]));
            }
            Perturbation::CarrierBreaks { carrier } => {
                if !s.remove(&atom("operational", &[carrier])) {
                    return None;
                }
                s.insert(atom("broken", &[carrier]));
            }
        }
        Some(s)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("no plan found for the original problem ({0})")]
    NoOriginalPlan(String),
    #[error("original plan has {0} steps; at least 2 are needed to perturb")]
    PlanTooShort(usize),
    #[error("no eligible {0} perturbation after {1} draws")]
    Unperturbable(PerturbationKind, usize),
    #[error("scenario file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario file: {0}")]
    Plan(#[from] PlanFileError),
    #[error("scenario file: {0}")]
    State(#[from] PddlError),
    #[error("scenario file: original plan does not execute: {0}")]
    Replay(String),
}

/// Redraws allowed before a perturbation is given up on.
pub const MAX_DRAWS: usize = 64;

/// Where to perturb the original plan and how.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbOutcome {
    pub perturbation: Perturbation,
    pub prefix_len: usize,
    pub state: State,
}

/// Carriers named in the arguments of `plan`'s actions.
fn carriers_used(problem: &Problem, plan: &Plan) -> BTreeSet<String> {
    plan.steps()
        .iter()
        .flat_map(|a| a.args.iter())
        .filter(|o| matches!(problem.objects.get(*o).map(String::as_str), Some("forklift" | "transport")))
        .cloned()
        .collect()
}

fn location_of<'a>(state: &'a State, carrier: &str) -> Option<&'a str> {
    state
        .iter()
        .find(|a| a.predicate == "at" && a.args[0] == carrier)
        .map(|a| a.args[1].as_str())
}

/// Draws a perturbation of `kind` at a random point of `plan`. With
/// `require_invalidation`, draws after which the rest of the plan still
/// executes are rejected, since they need no replanning.
pub fn perturb(
    problem: &Problem,
    plan: &Plan,
    kind: PerturbationKind,
    rng: &mut ChaCha8Rng,
    require_invalidation: bool,
) -> Result<PerturbOutcome, ScenarioError> {
    if plan.len() < 2 {
        return Err(ScenarioError::PlanTooShort(plan.len()));
    }
    let trace = simulate(problem, plan).map_err(|e| ScenarioError::Replay(e.to_string()))?;
    for _ in 0..MAX_DRAWS {
        let prefix_len = rng.gen_range(1..plan.len());
        let state = &trace.states()[prefix_len];
        let candidates: Vec<Perturbation> = match kind {
            PerturbationKind::Fall => state
                .iter()
                .filter_map(|a| {
                    let (package, carrier) = match a.predicate.as_str() {
                        "holding" => (&a.args[1], &a.args[0]),
                        "on" => (&a.args[0], &a.args[1]),
                        _ => return None,
                    };
                    let g = location_of(state, carrier)?;
                    Some(Perturbation::PackageFalls {
                        package: package.clone(),
                        gridsquare: g.to_string(),
                    })
                })
                .collect(),
            PerturbationKind::Breakdown => carriers_used(problem, &plan.suffix(prefix_len))
                .into_iter()
                .filter(|c| state.contains(&atom("operational", &[c])) && location_of(state, c).is_some())
                .map(|carrier| Perturbation::CarrierBreaks { carrier })
                .collect(),
        };
        let Some(perturbation) = candidates.choose(rng).cloned() else {
            continue;
        };
        let next = perturbation.apply(state).expect("candidate fits its state");
        if require_invalidation && simulate_from(&next, &plan.suffix(prefix_len)).is_ok() {
            continue;
        }
        return Ok(PerturbOutcome {
            perturbation,
            prefix_len,
            state: next,
        });
    }
    Err(ScenarioError::Unperturbable(kind, MAX_DRAWS))
}

/// One replanning episode: an instance, its original plan, and the state
/// after executing part of the plan and being perturbed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub spec: InstanceSpec,
    pub problem: Problem,
    pub original_plan: Plan,
    pub perturbation: Perturbation,
    pub prefix_len: usize,
    pub perturbed_state: State,
}

impl Scenario {
    /// Generates the instance, plans for it and perturbs the plan. All
    /// randomness comes from `spec.seed`.
    pub fn generate(spec: InstanceSpec, kind: PerturbationKind, cfg: &PlannerConfig) -> Result<Scenario, ScenarioError> {
        let domain = warehouse_domain();
        let problem = generate_instance(spec);
        let result = solve(&CompiledProblem::identity(&domain, &problem), cfg);
        let plan = result
            .plan
            .ok_or_else(|| ScenarioError::NoOriginalPlan(result.status.to_string()))?;
        let mut rng = spec.rng();
        rng.set_stream(1);
        let out = perturb(&problem, &plan, kind, &mut rng, true)?;
        Ok(Scenario {
            spec,
            problem,
            original_plan: plan,
            perturbation: out.perturbation,
            prefix_len: out.prefix_len,
            perturbed_state: out.state,
        })
    }

    /// The problem to replan: same goals, initial state I'.
    pub fn perturbed_problem(&self) -> Problem {
        let mut p = self.problem.with_init(self.perturbed_state.clone());
        p.name = format!("{}-perturbed", self.problem.name);
        p
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            seed: self.spec.seed,
            num_packages: self.spec.num_packages,
            perturbation: self.perturbation.clone(),
            prefix_len: self.prefix_len,
            original_plan: self.original_plan.steps().iter().map(|a| a.to_string()).collect(),
            perturbed_state: self.perturbed_state.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn from_file(f: &ScenarioFile) -> Result<Scenario, ScenarioError> {
        let spec = InstanceSpec::new(f.num_packages, f.seed);
        let domain = warehouse_domain();
        let problem = generate_instance(spec);
        let plan = Plan::parse(&f.original_plan.join("\n"), &domain, &problem)?;
        simulate(&problem, &plan).map_err(|e| ScenarioError::Replay(e.to_string()))?;
        let state = parse_atoms(&f.perturbed_state.join(" "), &domain, &problem)?;
        Ok(Scenario {
            spec,
            problem,
            original_plan: plan,
            perturbation: f.perturbation.clone(),
            prefix_len: f.prefix_len,
            perturbed_state: state,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        Scenario::from_file(&serde_json::from_str(text)?)
    }
}

/// Serialized scenario. The problem is regenerated from seed and size, so
/// the file is enough to replay a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub seed: u64,
    pub num_packages: usize,
    pub perturbation: Perturbation,
    pub prefix_len: usize,
    pub original_plan: Vec<String>,
    pub perturbed_state: Vec<String>,
}
