mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use replan_core::pddl::{ground, GroundAction, GroundOptions, State};
use replan_core::plan::{simulate, validate, Plan};
use replan_core::warehouses::{generate_instance, warehouse_domain, InstanceSpec};

/// Straight-line STRIPS semantics: check, delete, then add.
fn naive_run(init: &State, plan: &[GroundAction]) -> Result<Vec<State>, usize> {
    let mut states = vec![init.clone()];
    for (i, a) in plan.iter().enumerate() {
        let mut s = states.last().unwrap().clone();
        if a.pre.iter().any(|p| !s.contains(p)) {
            return Err(i);
        }
        s.retain(|f| !a.del.contains(f));
        s.extend(a.add.iter().cloned());
        states.push(s);
    }
    Ok(states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulator_matches_naive_semantics(n in 1usize..=3, seed in 0u64..200, walk in 0u64..1000, junk in 0usize..4) {
        let d = warehouse_domain();
        let p = generate_instance(InstanceSpec::new(n, seed));
        let actions = ground(&d, &p, GroundOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(walk);
        let mut plan = common::random_walk(&actions, &p.init, 25, &mut rng);
        // splice in arbitrary actions, which are usually inapplicable
        for _ in 0..junk {
            let at = rand::Rng::gen_range(&mut rng, 0..=plan.len());
            plan.0.insert(at, actions.choose(&mut rng).unwrap().clone());
        }
        let ours = simulate(&p, &plan);
        match naive_run(&p.init, plan.steps()) {
            Ok(states) => prop_assert_eq!(ours.unwrap().0, states),
            Err(i) => prop_assert_eq!(ours.unwrap_err().index, i),
        }
    }
}

#[test]
fn soft_goals_count_when_achieved_midway() {
    let d = warehouse_domain();
    let mut p = generate_instance(InstanceSpec::new(1, 3));
    let actions = ground(&d, &p, GroundOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let plan = loop {
        let plan = common::random_walk(&actions, &p.init, 12, &mut rng);
        if plan.len() >= 2 {
            break plan;
        }
    };
    let trace = simulate(&p, &plan).unwrap();
    // an atom added by the first step and deleted later still counts
    let fleeting = plan.steps()[0]
        .add
        .iter()
        .find(|a| !p.init.contains(*a))
        .cloned()
        .expect("first step adds something new");
    p.hard_goals.clear();
    p.soft_goals.insert(
        "seen".into(),
        replan_core::pddl::SoftGoal {
            name: "seen".into(),
            atom: fleeting.clone(),
            penalty: replan_core::Cost::from_integer(4),
        },
    );
    assert!(trace.ever_holds(&fleeting));
    assert_eq!(validate(&p, &plan).penalty_sum, replan_core::Cost::from_integer(0));
    assert_eq!(validate(&p, &Plan::default()).penalty_sum, replan_core::Cost::from_integer(4));
}
