//! `replan`: generate Warehouses scenarios, compile replanning models, plan,
//! validate, diff and benchmark.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use replan_core::compile::{
    build_constraints, compile, to_preferences, CompileOptions, CompiledProblem, ConstraintOptions, ConstraintScope,
    ReplanModel,
};
use replan_core::cost_text;
use replan_core::harness::{
    emit_plots, replan, run_bench, score, strategy_config, write_results, BenchConfig, RunOptions, Solver,
};
use replan_core::pddl::{
    emit_domain, emit_problem, parse_atoms, parse_domain, parse_problem, Dialect, Domain, Problem,
};
use replan_core::plan::{plan_diff, plan_diff_multiset, simulate, validate, Plan};
use replan_core::planner::{solve, solve_external, HeuristicKind, PlanResult, PlannerConfig};
use replan_core::warehouses::{
    generate_instance, InstanceSpec, PerturbationKind, Scenario, COMMITMENT_PREDICATES,
    DOMAIN_PDDL,
};
use replan_core::Cost;

#[derive(Parser)]
#[command(name = "replan", version, about = "Replanning under restart, similarity and commitment models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Warehouses instance, its original plan and a perturbed scenario.
    Gen(GenArgs),
    /// Solve a problem (preferences included) with the chosen solver.
    Plan(PlanArgs),
    /// Replan a scenario under one strategy and report every metric.
    Replan(ReplanArgs),
    /// Compile a replanning model into a PDDL3 domain and problem.
    Compile(CompileArgs),
    /// Execute a plan and check it against the problem's goals.
    Simulate(SimulateArgs),
    /// Set and symmetric differences between two plans.
    Diff(DiffArgs),
    /// Run the full experiment and write CSV, summary and metadata.
    Bench(BenchArgs),
    /// Turn a results CSV into plot data and rendering scripts.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct PlannerArgs {
    /// Wall-clock budget per search, seconds.
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    /// Maximum number of expanded nodes.
    #[arg(long, default_value_t = PlannerConfig::default().node_budget)]
    node_budget: u64,
    /// Weight of plan length against one unit of penalty.
    #[arg(long, default_value = "0.01", value_parser = parse_cost)]
    w_len: Cost,
    #[arg(long, default_value = "relaxed-plan", value_parser = parse_heuristic)]
    heuristic: HeuristicKind,
    /// Stop at the first plan instead of improving it.
    #[arg(long)]
    first_solution: bool,
    /// Non-zero seeds shuffle action order.
    #[arg(long, default_value_t = 0)]
    planner_seed: u64,
    /// `embedded` or `external:<template>` with {domain} {problem} {plan_out} {timeout}.
    #[arg(long, default_value = "embedded")]
    solver: Solver,
}

impl PlannerArgs {
    fn config(&self) -> PlannerConfig {
        PlannerConfig {
            time_budget_secs: self.time_budget,
            node_budget: self.node_budget,
            w_len: self.w_len,
            heuristic: self.heuristic,
            anytime: !self.first_solution,
            seed: self.planner_seed,
            max_plan_len: None,
        }
    }
}

fn parse_cost(s: &str) -> Result<Cost, String> {
    cost_text::from_text(s).ok_or_else(|| format!("not a number: `{s}`"))
}

fn parse_heuristic(s: &str) -> Result<HeuristicKind, String> {
    match s {
        "relaxed-plan" => Ok(HeuristicKind::RelaxedPlan),
        "goal-count" => Ok(HeuristicKind::GoalCount),
        other => Err(format!("unknown heuristic `{other}` (relaxed-plan, goal-count)")),
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    packages: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fall")]
    perturbation: PerturbationKind,
    /// Only write the domain and problem.
    #[arg(long)]
    no_scenario: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args)]
struct ReplanArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "similarity")]
    strategy: ReplanModel,
    #[arg(long, default_value = "suffix")]
    scope: ConstraintScope,
    /// Let restart improve its first plan too.
    #[arg(long)]
    restart_anytime: bool,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    domain: PathBuf,
    /// The problem the old plan was made for.
    #[arg(long)]
    problem: PathBuf,
    /// The old plan.
    #[arg(long)]
    plan: PathBuf,
    /// Atoms of the perturbed state, e.g. `(at f1 g2) (operational f1)`.
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    model: ReplanModel,
    /// Comma-separated commitment predicates.
    #[arg(long, value_delimiter = ',', default_values_t = COMMITMENT_PREDICATES.map(String::from))]
    commitment_preds: Vec<String>,
    #[arg(long, default_value = "suffix")]
    scope: ConstraintScope,
    /// Steps of the old plan already executed.
    #[arg(long, default_value_t = 0)]
    executed: usize,
    /// Put marker effects on the original actions instead of adding copies.
    #[arg(long)]
    replace_originals: bool,
    #[arg(long, default_value = "compiled-domain.pddl")]
    out_domain: PathBuf,
    #[arg(long, default_value = "compiled-problem.pddl")]
    out_problem: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Print every intermediate state.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    old: PathBuf,
    #[arg(long)]
    new: PathBuf,
    /// Count repeated actions separately.
    #[arg(long)]
    multiset: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Override the package range, e.g. `1..4`.
    #[arg(long)]
    packages: Option<String>,
    #[arg(long)]
    seeds: Option<u64>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(domain: &Path, problem: &Path) -> Result<(Domain, Problem)> {
    let d = parse_domain(&read(domain)?).with_context(|| format!("in {}", domain.display()))?;
    let p = parse_problem(&read(problem)?, &d).with_context(|| format!("in {}", problem.display()))?;
    Ok((d, p))
}

fn load_plan(path: &Path, d: &Domain, p: &Problem) -> Result<Plan> {
    Plan::parse(&read(path)?, d, p).with_context(|| format!("in {}", path.display()))
}

fn run_solver(cp: &CompiledProblem, cfg: &PlannerConfig, solver: &Solver) -> Result<PlanResult> {
    Ok(match solver {
        Solver::Embedded => solve(cp, cfg),
        Solver::External(t) => solve_external(cp, t, cfg.time_budget_secs, cfg.w_len)?,
    })
}

fn report(r: &PlanResult) {
    eprintln!(
        "status {}  length {}  penalty {}  objective {}  nodes {}  time {} ms",
        r.status,
        r.plan_length,
        cost_text::to_text(r.penalty_sum),
        cost_text::to_text(r.objective),
        r.nodes_expanded,
        r.wall_time_ms
    );
}

fn gen(a: GenArgs) -> Result<()> {
    let spec = InstanceSpec::new(a.packages, a.seed);
    let problem = generate_instance(spec);
    write(&a.out.join("domain.pddl"), DOMAIN_PDDL)?;
    write(&a.out.join("problem.pddl"), &emit_problem(&problem, Dialect::Plain)?)?;
    if a.no_scenario {
        return Ok(());
    }
    let s = Scenario::generate(spec, a.perturbation, &a.planner.config())?;
    write(&a.out.join("plan.txt"), &s.original_plan.to_file_string())?;
    write(&a.out.join("scenario.json"), &s.to_json())?;
    let state: Vec<String> = s.perturbed_state.iter().map(|x| x.to_string()).collect();
    write(&a.out.join("state.txt"), &(state.join("\n") + "\n"))?;
    write(&a.out.join("perturbed.pddl"), &emit_problem(&s.perturbed_problem(), Dialect::Plain)?)?;
    eprintln!(
        "{}: plan of {} steps, {:?} after {} steps",
        problem.name,
        s.original_plan.len(),
        s.perturbation,
        s.prefix_len
    );
    Ok(())
}

fn plan(a: PlanArgs) -> Result<()> {
    let (d, p) = load(&a.domain, &a.problem)?;
    let r = run_solver(&CompiledProblem::identity(&d, &p), &a.planner.config(), &a.planner.solver)?;
    report(&r);
    let Some(plan) = &r.plan else {
        bail!("no plan ({})", r.status);
    };
    match a.out {
        Some(path) => write(&path, &plan.to_file_string()),
        None => {
            print!("{}", plan.to_file_string());
            Ok(())
        }
    }
}

fn replan_cmd(a: ReplanArgs) -> Result<()> {
    let s = Scenario::from_json(&read(&a.scenario)?)?;
    let opts = RunOptions {
        scope: a.scope,
        solver: a.planner.solver.clone(),
        restart_first_solution: !a.restart_anytime,
    };
    let cfg = strategy_config(&a.planner.config(), a.strategy, &opts);
    let r = replan(&s, a.strategy, &cfg, &opts)?;
    report(&r.result);
    if let Some(plan) = &r.plan {
        print!("{}", plan.to_file_string());
    }
    let record = score(&s, a.strategy, &r, a.scope)?;
    write_results(&[record], std::io::stderr())?;
    Ok(())
}

fn compile_cmd(a: CompileArgs) -> Result<()> {
    let (d, p) = load(&a.domain, &a.problem)?;
    let old = load_plan(&a.plan, &d, &p)?;
    let state = parse_atoms(&read(&a.state)?, &d, &p)?;
    let mut perturbed = p.with_init(state);
    perturbed.name = format!("{}-replan", p.name);
    let opts = ConstraintOptions {
        scope: a.scope,
        commitment_predicates: a.commitment_preds.into_iter().collect::<BTreeSet<_>>(),
        ..ConstraintOptions::default()
    };
    let cs = build_constraints(a.model, &p, &old, a.executed, &opts)?;
    let cp = compile(
        &d,
        &perturbed,
        &cs,
        CompileOptions {
            replace_originals: a.replace_originals,
        },
    )?;
    write(&a.out_domain, &emit_domain(&cp.domain))?;
    write(&a.out_problem, &emit_problem(&to_preferences(&cp), Dialect::Pddl3)?)?;
    eprintln!("{} constraints, {} soft goals", cs.len(), cp.problem.soft_goals.len());
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let (d, p) = load(&a.domain, &a.problem)?;
    let plan = load_plan(&a.plan, &d, &p)?;
    if a.trace {
        if let Ok(trace) = simulate(&p, &plan) {
            for (i, s) in trace.states().iter().enumerate() {
                let atoms: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                println!("state {i}: {}", atoms.join(" "));
            }
        }
    }
    let v = validate(&p, &plan);
    if let Some(f) = &v.failure {
        println!("invalid: {f}");
    } else if !v.valid {
        let unmet: Vec<String> = v.unmet_hard_goals.iter().map(|g| g.to_string()).collect();
        println!("invalid: hard goals not reached: {}", unmet.join(" "));
    } else {
        println!("valid");
    }
    println!("length {}", plan.len());
    println!("penalty {}", cost_text::to_text(v.penalty_sum));
    for g in &v.unsatisfied_soft_goals {
        println!("unsatisfied preference {g}");
    }
    if !v.valid {
        std::process::exit(1);
    }
    Ok(())
}

fn diff(a: DiffArgs) -> Result<()> {
    let (d, p) = load(&a.domain, &a.problem)?;
    let old = load_plan(&a.old, &d, &p)?;
    let new = load_plan(&a.new, &d, &p)?;
    let m = if a.multiset {
        plan_diff_multiset(&old, &new)
    } else {
        plan_diff(&old, &new)
    };
    println!("set_diff {}", m.set_diff);
    println!("sym_diff {}", m.sym_diff);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => BenchConfig::from_toml(&read(path)?)?,
        None => BenchConfig::default(),
    };
    if let Some(range) = &a.packages {
        let (lo, hi) = range.split_once("..").unwrap_or((range, range));
        cfg.min_packages = lo.trim().parse().context("package range")?;
        cfg.max_packages = hi.trim_start_matches('=').trim().parse().context("package range")?;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = n;
    }
    cfg.check()?;
    if a.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let out = run_bench(&cfg, &a.out)?;
    for (id, why) in &out.skipped {
        eprintln!("skipped {id}: {why}");
    }
    eprintln!("{} rows -> {}", out.records.len(), out.csv.display());
    eprintln!("summary -> {}", out.summary.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Plan(a) => plan(a),
        Command::Replan(a) => replan_cmd(a),
        Command::Compile(a) => compile_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Diff(a) => diff(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => {
            for f in emit_plots(&a.csv, &a.out)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}
