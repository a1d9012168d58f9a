mod common;

use replan_core::compile::ReplanModel;
use replan_core::plan::validate;
use replan_core::planner::{search_penalty, solve, PlanStatus, PlannerConfig};
use replan_core::warehouses::warehouse_domain;
use replan_core::Cost;

fn budgeted() -> PlannerConfig {
    PlannerConfig {
        node_budget: 30_000,
        ..PlannerConfig::default()
    }
}

#[test]
fn plans_are_sound_on_both_problems() {
    let domain = warehouse_domain();
    for s in common::scenarios(1..=2, 3) {
        let perturbed = s.perturbed_problem();
        for model in ReplanModel::ALL {
            let cp = common::compiled(&s, model);
            let r = solve(&cp, &budgeted());
            let plan = r.plan.as_ref().unwrap_or_else(|| panic!("{} {model}: {}", s.spec.name(), r.status));
            let v = validate(&cp.problem, plan);
            assert!(v.valid, "{} {model}", s.spec.name());
            assert_eq!(v.penalty_sum, r.penalty_sum);
            assert_eq!(search_penalty(&cp, plan).unwrap(), r.penalty_sum);
            assert_eq!(r.plan_length, plan.len());
            assert_eq!(r.objective, r.penalty_sum + budgeted().w_len * Cost::from_integer(plan.len() as i64));
            let back = cp.deinstrument(plan, &domain, &perturbed).unwrap();
            assert!(validate(&perturbed, &back).valid);
        }
    }
}

#[test]
fn solving_is_deterministic() {
    for s in common::scenarios(2..=2, 2) {
        for model in [ReplanModel::Similarity, ReplanModel::Commitment] {
            let cp = common::compiled(&s, model);
            let a = solve(&cp, &budgeted());
            let b = solve(&cp, &budgeted());
            assert_eq!(a.plan, b.plan);
            assert_eq!(a.incumbents, b.incumbents);
            assert_eq!(a.nodes_expanded, b.nodes_expanded);
        }
    }
}

#[test]
fn anytime_never_loses_to_first_solution() {
    for s in common::scenarios(1..=2, 2) {
        for model in ReplanModel::ALL {
            let cp = common::compiled(&s, model);
            let first = solve(&cp, &common::first_solution());
            let any = solve(&cp, &budgeted());
            assert!(any.objective <= first.objective, "{} {model}", s.spec.name());
            assert!(matches!(any.status, PlanStatus::OptimalForBudget | PlanStatus::Satisficing));
        }
    }
}
