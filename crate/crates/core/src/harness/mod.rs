//! Experiment runner: replans every scenario under every strategy and
//! scores each new plan under all three metric families.

mod plots;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{build_constraints, compile, CompileError, CompileOptions, ConstraintOptions, ConstraintScope, ReplanModel};
use crate::plan::{extract_commitments, honored_commitments, plan_diff, simulate_from, Plan};
use crate::planner::{solve, solve_external, ExternalError, PlanResult, PlanStatus, PlannerConfig};
use crate::warehouses::{commitment_predicates, warehouse_domain, InstanceSpec, PerturbationKind, Scenario, ScenarioError};
use crate::Cost;

pub use plots::{emit_plots, PlotError, PLOT_METRICS};

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 10] = [
    "instance", "seed", "packages", "strategy", "time_ms", "plan_len", "set_diff", "sym_diff", "violations", "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Timeout,
    Unsolvable,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "timeout",
            RunStatus::Unsolvable => "unsolvable",
        })
    }
}

/// One replan, measured. Metric fields are None unless status is ok.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub instance: String,
    pub seed: u64,
    pub packages: usize,
    pub strategy: ReplanModel,
    pub time_ms: Option<u64>,
    pub plan_len: Option<usize>,
    pub set_diff: Option<usize>,
    pub sym_diff: Option<usize>,
    pub violations: Option<usize>,
    pub status: RunStatus,
    /// Penalty the solver optimized; not written to the CSV.
    #[serde(skip)]
    pub penalty: Option<Cost>,
}

impl MetricsRecord {
    fn csv_row(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        vec![
            self.instance.clone(),
            self.seed.to_string(),
            self.packages.to_string(),
            self.strategy.to_string(),
            opt(self.time_ms),
            opt(self.plan_len),
            opt(self.set_diff),
            opt(self.sym_diff),
            opt(self.violations),
            self.status.to_string(),
        ]
    }
}

/// Which planner solves the compiled problems.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    Embedded,
    /// Shell command template with `{domain} {problem} {plan_out} {timeout}`.
    External(String),
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "embedded" => Ok(Solver::Embedded),
            Some(("external", t)) if !t.trim().is_empty() => Ok(Solver::External(t.to_string())),
            _ => Err(format!("expected `embedded` or `external:<template>`, got `{s}`")),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::Embedded => f.write_str("embedded"),
            Solver::External(t) => write!(f, "external:{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub scope: ConstraintScope,
    pub solver: Solver,
    /// Restart takes the first plan found instead of searching on; it
    /// optimizes nothing but speed.
    pub restart_first_solution: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            scope: ConstraintScope::Suffix,
            solver: Solver::Embedded,
            restart_first_solution: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("new plan does not execute from the perturbed state: {0}")]
    Replay(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(String),
}

/// Planner settings used for `strategy`.
pub fn strategy_config(base: &PlannerConfig, strategy: ReplanModel, opts: &RunOptions) -> PlannerConfig {
    let mut cfg = base.clone();
    if strategy == ReplanModel::Restart && opts.restart_first_solution {
        cfg.anytime = false;
    }
    cfg
}

/// The replan itself, plus the compiled problem it solved.
pub struct Replan {
    pub result: PlanResult,
    /// The new plan in the original domain's actions.
    pub plan: Option<Plan>,
    pub compile_and_solve_ms: u64,
}

/// Compiles the scenario under `strategy` and solves it.
pub fn replan(scenario: &Scenario, strategy: ReplanModel, cfg: &PlannerConfig, opts: &RunOptions) -> Result<Replan, HarnessError> {
    let domain = warehouse_domain();
    let perturbed = scenario.perturbed_problem();
    let start = Instant::now();
    let constraint_opts = ConstraintOptions {
        scope: opts.scope,
        commitment_predicates: commitment_predicates(),
        ..ConstraintOptions::default()
    };
    let cs = build_constraints(strategy, &scenario.problem, &scenario.original_plan, scenario.prefix_len, &constraint_opts)?;
    let cp = compile(&domain, &perturbed, &cs, CompileOptions::default())?;
    let result = match &opts.solver {
        Solver::Embedded => solve(&cp, cfg),
        Solver::External(t) => solve_external(&cp, t, cfg.time_budget_secs, cfg.w_len)?,
    };
    let elapsed = start.elapsed().as_millis() as u64;
    let plan = match &result.plan {
        Some(p) => Some(cp.deinstrument(p, &domain, &perturbed)?),
        None => None,
    };
    Ok(Replan {
        result,
        plan,
        compile_and_solve_ms: elapsed,
    })
}

/// Replans one scenario and measures the new plan under every metric,
/// whichever one the strategy optimized.
pub fn run_scenario(
    scenario: &Scenario,
    strategy: ReplanModel,
    cfg: &PlannerConfig,
    opts: &RunOptions,
) -> Result<MetricsRecord, HarnessError> {
    let r = replan(scenario, strategy, cfg, opts)?;
    score(scenario, strategy, &r, opts.scope)
}

/// Measures a finished replan. Diffs are taken against `scope` of the old
/// plan; violations count the old plan's commitments that never hold on
/// the new plan's trace.
pub fn score(scenario: &Scenario, strategy: ReplanModel, r: &Replan, scope: ConstraintScope) -> Result<MetricsRecord, HarnessError> {
    let mut record = MetricsRecord {
        instance: instance_id(&scenario.spec),
        seed: scenario.spec.seed,
        packages: scenario.spec.num_packages,
        strategy,
        time_ms: None,
        plan_len: None,
        set_diff: None,
        sym_diff: None,
        violations: None,
        status: match r.result.status {
            PlanStatus::Timeout => RunStatus::Timeout,
            PlanStatus::Unsolvable => RunStatus::Unsolvable,
            _ => RunStatus::Ok,
        },
        penalty: None,
    };
    let Some(plan) = &r.plan else {
        return Ok(record);
    };

    let old = scope.select(&scenario.original_plan, scenario.prefix_len);
    let diff = plan_diff(&old, plan);
    let commitments = extract_commitments(&scenario.problem, &scenario.original_plan, &commitment_predicates())
        .map_err(|e| HarnessError::Replay(e.to_string()))?;
    let trace = simulate_from(&scenario.perturbed_state, plan).map_err(|e| HarnessError::Replay(e.to_string()))?;
    let honored = honored_commitments(&commitments, &trace).len();

    record.time_ms = Some(r.compile_and_solve_ms);
    record.plan_len = Some(plan.len());
    record.set_diff = Some(diff.set_diff);
    record.sym_diff = Some(diff.sym_diff);
    record.violations = Some(commitments.len() - honored);
    record.penalty = Some(r.result.penalty_sum);
    Ok(record)
}

pub fn instance_id(spec: &InstanceSpec) -> String {
    format!("p{:02}-s{}", spec.num_packages, spec.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub min_packages: usize,
    pub max_packages: usize,
    pub seeds: u64,
    /// Seeds run from seed_base to seed_base + seeds - 1.
    pub seed_base: u64,
    pub strategies: Vec<ReplanModel>,
    /// Scenario i of a size uses perturbations[i % len].
    pub perturbations: Vec<PerturbationKind>,
    pub scope: ConstraintScope,
    /// `embedded` or `external:<template>`.
    pub solver: String,
    pub restart_first_solution: bool,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    /// Search settings for replanning; time_budget_secs is the per-run
    /// timeout.
    pub planner: PlannerConfig,
    /// Search settings for the original plans.
    pub original_planner: PlannerConfig,
}

/// Per-run node budget of the default benchmark configuration.
pub const BENCH_NODE_BUDGET: u64 = 200_000;

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            min_packages: 1,
            max_packages: 12,
            seeds: 4,
            seed_base: 0,
            strategies: ReplanModel::ALL.to_vec(),
            perturbations: vec![PerturbationKind::Fall, PerturbationKind::Breakdown],
            scope: ConstraintScope::Suffix,
            solver: "embedded".into(),
            restart_first_solution: true,
            jobs: 0,
            // the node budget binds before the time budget on desk-scale
            // instances, which keeps results independent of machine speed
            planner: PlannerConfig {
                node_budget: BENCH_NODE_BUDGET,
                ..PlannerConfig::default()
            },
            original_planner: PlannerConfig {
                anytime: false,
                ..PlannerConfig::default()
            },
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.min_packages == 0 || self.min_packages > self.max_packages {
            return fail("package range must be non-empty and start at 1 or more");
        }
        if self.seeds == 0 {
            return fail("seeds must be at least 1");
        }
        if self.strategies.is_empty() || self.perturbations.is_empty() {
            return fail("strategies and perturbations must be non-empty");
        }
        if self.planner.node_budget == 0 || self.planner.time_budget_secs <= 0.0 {
            return fail("planner budgets must be positive");
        }
        self.solver.parse::<Solver>().map_err(HarnessError::Config)?;
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            scope: self.scope,
            solver: self.solver.parse().expect("checked"),
            restart_first_solution: self.restart_first_solution,
        }
    }

    /// Scenarios in run order: by size, then seed.
    pub fn scenario_specs(&self) -> Vec<(InstanceSpec, PerturbationKind)> {
        let mut out = Vec::new();
        for n in self.min_packages..=self.max_packages {
            for i in 0..self.seeds {
                let kind = self.perturbations[i as usize % self.perturbations.len()];
                out.push((InstanceSpec::new(n, self.seed_base + i), kind));
            }
        }
        out
    }
}

/// Mean of each measurement over the ok rows of one (size, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub packages: usize,
    pub strategy: ReplanModel,
    pub ok: usize,
    pub runs: usize,
    pub time_ms: Option<f64>,
    pub plan_len: Option<f64>,
    pub set_diff: Option<f64>,
    pub sym_diff: Option<f64>,
    pub violations: Option<f64>,
}

pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, ReplanModel), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.packages, r.strategy)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((packages, strategy), rows)| {
            let ok: Vec<&&MetricsRecord> = rows.iter().filter(|r| r.status == RunStatus::Ok).collect();
            let mean = |f: &dyn Fn(&MetricsRecord) -> Option<f64>| -> Option<f64> {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            SummaryRow {
                packages,
                strategy,
                ok: ok.len(),
                runs: rows.len(),
                time_ms: mean(&|r| r.time_ms.map(|x| x as f64)),
                plan_len: mean(&|r| r.plan_len.map(|x| x as f64)),
                set_diff: mean(&|r| r.set_diff.map(|x| x as f64)),
                sym_diff: mean(&|r| r.sym_diff.map(|x| x as f64)),
                violations: mean(&|r| r.violations.map(|x| x as f64)),
            }
        })
        .collect()
}

/// Files written by [`run_bench`].
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub records: Vec<MetricsRecord>,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub meta: PathBuf,
    /// Scenarios that could not be generated, with the reason.
    pub skipped: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Meta<'a> {
    scope: ConstraintScope,
    columns: [&'a str; 10],
    skipped: &'a [(String, String)],
    config: &'a BenchConfig,
}

enum Job {
    Rows(Vec<MetricsRecord>),
    Skipped(String, String),
}

/// Runs every (scenario, strategy) pair of `cfg` and writes `results.csv`,
/// `summary.csv` and `results.meta.json` into `out_dir`. Rows are written in
/// scenario order as soon as they are available, to `results.csv.partial`
/// which is renamed once the run completes.
pub fn run_bench(cfg: &BenchConfig, out_dir: &Path) -> Result<BenchOutput, HarnessError> {
    cfg.check()?;
    fs::create_dir_all(out_dir)?;
    let specs = cfg.scenario_specs();
    let opts = cfg.run_options();
    let jobs = match cfg.jobs {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        n => n,
    }
    .min(specs.len().max(1));

    let csv_path = out_dir.join("results.csv");
    let partial = out_dir.join("results.csv.partial");
    let mut writer = csv::Writer::from_writer(File::create(&partial)?);
    writer.write_record(CSV_HEADER)?;
    writer.flush()?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<Job, HarnessError>)>();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    std::thread::scope(|scope| -> Result<(), HarnessError> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, specs, opts) = (&next, &specs, &opts);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(spec, kind)) = specs.get(i) else {
                    break;
                };
                let job = run_one(cfg, spec, kind, opts);
                if tx.send((i, job)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending: BTreeMap<usize, Job> = BTreeMap::new();
        let mut written = 0;
        for (i, job) in rx {
            pending.insert(i, job?);
            while let Some(job) = pending.remove(&written) {
                match job {
                    Job::Rows(rows) => {
                        for r in rows {
                            writer.write_record(r.csv_row())?;
                            records.push(r);
                        }
                        writer.flush()?;
                    }
                    Job::Skipped(id, why) => skipped.push((id, why)),
                }
                written += 1;
            }
        }
        Ok(())
    })?;
    drop(writer);
    fs::rename(&partial, &csv_path)?;

    let summary_path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    for row in summarize(&records) {
        w.serialize(row)?;
    }
    w.flush()?;

    let meta_path = out_dir.join("results.meta.json");
    let meta = Meta {
        scope: cfg.scope,
        columns: CSV_HEADER,
        skipped: &skipped,
        config: cfg,
    };
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))?;

    Ok(BenchOutput {
        records,
        csv: csv_path,
        summary: summary_path,
        meta: meta_path,
        skipped,
    })
}

fn run_one(cfg: &BenchConfig, spec: InstanceSpec, kind: PerturbationKind, opts: &RunOptions) -> Result<Job, HarnessError> {
    let scenario = match Scenario::generate(spec, kind, &cfg.original_planner) {
        Ok(s) => s,
        Err(e) => return Ok(Job::Skipped(instance_id(&spec), e.to_string())),
    };
    cfg.strategies
        .iter()
        .map(|&s| run_scenario(&scenario, s, &strategy_config(&cfg.planner, s, opts), opts))
        .collect::<Result<Vec<_>, _>>()
        .map(Job::Rows)
}

/// Reads a results CSV back into records.
pub fn read_results(path: &Path) -> Result<Vec<MetricsRecord>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Writes records as CSV with the fixed header.
pub fn write_results(records: &[MetricsRecord], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
