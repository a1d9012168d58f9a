use super::*;
use crate::plan::simulate;
use crate::warehouses::Perturbation;

fn quick_bench() -> BenchConfig {
    BenchConfig {
        min_packages: 1,
        max_packages: 1,
        seeds: 2,
        jobs: 2,
        planner: PlannerConfig {
            node_budget: 20_000,
            ..PlannerConfig::default()
        },
        ..BenchConfig::default()
    }
}

/// A scenario whose "perturbation" changed nothing, so the old suffix still
/// works.
fn unperturbed(seed: u64) -> Scenario {
    let cfg = PlannerConfig {
        anytime: false,
        ..PlannerConfig::default()
    };
    let mut s = Scenario::generate(InstanceSpec::new(1, seed), PerturbationKind::Fall, &cfg).unwrap();
    let trace = simulate(&s.problem, &s.original_plan).unwrap();
    s.perturbed_state = trace.states()[s.prefix_len].clone();
    s.perturbation = Perturbation::CarrierBreaks { carrier: "none".into() };
    s
}

#[test]
fn restart_compiles_to_the_perturbed_problem() {
    let s = unperturbed(1);
    let cs = build_constraints(
        ReplanModel::Restart,
        &s.problem,
        &s.original_plan,
        s.prefix_len,
        &ConstraintOptions::default(),
    )
    .unwrap();
    let cp = compile(&warehouse_domain(), &s.perturbed_problem(), &cs, CompileOptions::default()).unwrap();
    assert_eq!(cp.problem, s.perturbed_problem());
    assert_eq!(cp.domain, warehouse_domain());
}

#[test]
fn similarity_keeps_a_still_valid_suffix() {
    for seed in 0..3 {
        let s = unperturbed(seed);
        let r = run_scenario(&s, ReplanModel::Similarity, &PlannerConfig::default(), &RunOptions::default()).unwrap();
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.set_diff, Some(0), "seed {seed}");
        assert_eq!(r.penalty, Some(Cost::from_integer(0)));
    }
}

#[test]
fn every_strategy_scores_every_metric() {
    let cfg = PlannerConfig::default();
    let s = Scenario::generate(InstanceSpec::new(1, 4), PerturbationKind::Breakdown, &cfg).unwrap();
    let opts = RunOptions::default();
    let rows: Vec<MetricsRecord> = ReplanModel::ALL
        .iter()
        .map(|&m| run_scenario(&s, m, &strategy_config(&cfg, m, &opts), &opts).unwrap())
        .collect();
    for r in &rows {
        assert_eq!(r.instance, rows[0].instance);
        assert_eq!(r.status, RunStatus::Ok);
        assert!(r.time_ms.is_some() && r.plan_len.is_some() && r.sym_diff.is_some() && r.violations.is_some());
        let d = r.set_diff.unwrap();
        assert!(r.sym_diff.unwrap() >= d);
    }
    // each strategy's optimized penalty is the metric it is named after
    assert_eq!(rows[1].penalty.unwrap(), Cost::from_integer(rows[1].set_diff.unwrap() as i64));
    assert_eq!(rows[2].penalty.unwrap(), Cost::from_integer(rows[2].violations.unwrap() as i64));
}

#[test]
fn timeout_rows_have_no_measurements() {
    let s = unperturbed(2);
    let cfg = PlannerConfig {
        node_budget: 1,
        ..PlannerConfig::default()
    };
    let r = run_scenario(&s, ReplanModel::Restart, &cfg, &RunOptions::default()).unwrap();
    assert_eq!(r.status, RunStatus::Timeout);
    let mut out = Vec::new();
    write_results(&[r], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().nth(1).unwrap(), "p01-s2,2,1,restart,,,,,,timeout");
}

#[test]
fn bench_config_round_trips_through_toml() {
    let cfg = quick_bench();
    let back = BenchConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    let partial = BenchConfig::from_toml("max_packages = 3\n[planner]\nw_len = \"0.5\"\n").unwrap();
    assert_eq!(partial.planner.w_len, Cost::new(1, 2));
    assert_eq!(partial.seeds, 4);
    assert!(BenchConfig::from_toml("seeds = 0").is_err());
    assert!(BenchConfig::from_toml("min_packages = 3\nmax_packages = 2").is_err());
    assert!(BenchConfig::from_toml("solver = \"gurobi\"").is_err());
}

#[test]
fn default_config_has_48_scenarios() {
    assert_eq!(BenchConfig::default().scenario_specs().len(), 48);
}

#[test]
fn solver_spec_parses() {
    assert_eq!("embedded".parse::<Solver>().unwrap(), Solver::Embedded);
    assert_eq!(
        "external:plan {domain} {problem} {plan_out}".parse::<Solver>().unwrap(),
        Solver::External("plan {domain} {problem} {plan_out}".into())
    );
    assert!("external:".parse::<Solver>().is_err());
}

#[test]
fn bench_writes_ordered_rows_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_bench();
    let out = run_bench(&cfg, dir.path()).unwrap();
    assert_eq!(out.records.len() + 3 * out.skipped.len(), 6);
    let read = read_results(&out.csv).unwrap();
    assert_eq!(read.len(), out.records.len());
    let keys: Vec<(String, ReplanModel)> = read.iter().map(|r| (r.instance.clone(), r.strategy)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(!dir.path().join("results.csv.partial").exists());
    let meta = fs::read_to_string(&out.meta).unwrap();
    assert!(meta.contains("\"scope\": \"suffix\""));

    let plots = dir.path().join("plots");
    let files = emit_plots(&out.csv, &plots).unwrap();
    assert_eq!(files.len(), 10);
    let time_script = fs::read_to_string(plots.join("replan_time.py")).unwrap();
    assert!(time_script.contains("set_yscale('log')"));
    let size_script = fs::read_to_string(plots.join("plan_size.py")).unwrap();
    assert!(!size_script.contains("set_yscale"));
    let data = fs::read_to_string(plots.join("plan_size.dat")).unwrap();
    for s in ["restart", "similarity", "commitment"] {
        assert!(data.contains(&format!("\t{s}\t")));
    }
}

#[test]
fn plots_need_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    fs::write(&csv, CSV_HEADER.join(",") + "\n").unwrap();
    assert!(matches!(emit_plots(&csv, dir.path()), Err(PlotError::Empty(_))));
}

#[test]
fn timed_out_rows_are_not_plotted() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    fs::write(
        &csv,
        "instance,seed,packages,strategy,time_ms,plan_len,set_diff,sym_diff,violations,status\n\
         p01-s0,0,1,restart,5,7,1,2,0,ok\n\
         p01-s0,0,1,similarity,,,,,,timeout\n",
    )
    .unwrap();
    emit_plots(&csv, dir.path()).unwrap();
    let data = fs::read_to_string(dir.path().join("plan_size.dat")).unwrap();
    assert_eq!(data.lines().count(), 2);
}
