mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use replan_core::pddl::{ground, ActionSig, Domain, GroundOptions, Problem};
use replan_core::warehouses::{generate_instance, warehouse_domain, InstanceSpec};

/// Every tuple of objects, kept when each object's declared type fits the
/// parameter's type.
fn naive_ground(d: &Domain, p: &Problem) -> BTreeSet<ActionSig> {
    let objects: Vec<(&String, &String)> = p.objects.iter().collect();
    let mut out = BTreeSet::new();
    for schema in &d.actions {
        let mut tuples: Vec<Vec<String>> = vec![vec![]];
        for _ in &schema.params {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    objects.iter().map(move |(o, _)| {
                        let mut t = t.clone();
                        t.push(o.to_string());
                        t
                    })
                })
                .collect();
        }
        for t in tuples {
            let typed = schema
                .params
                .iter()
                .zip(&t)
                .all(|(param, o)| d.types.is_subtype(&p.objects[o], &param.ty));
            if typed {
                out.insert(ActionSig {
                    name: schema.name.clone(),
                    args: t,
                });
            }
        }
    }
    out
}

#[test]
fn unpruned_grounding_is_every_typed_instantiation() {
    let d = warehouse_domain();
    for n in 1..=2 {
        for seed in 0..3 {
            let p = generate_instance(InstanceSpec::new(n, seed));
            let got: BTreeSet<ActionSig> = ground(&d, &p, GroundOptions { prune_unreachable: false })
                .iter()
                .map(|a| a.sig())
                .collect();
            assert_eq!(got, naive_ground(&d, &p), "n={n} seed={seed}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Pruning drops only actions that no executable plan can use.
    #[test]
    fn pruning_keeps_every_reachable_action(n in 1usize..=2, seed in 0u64..500, walk in 0u64..1000) {
        let d = warehouse_domain();
        let p = generate_instance(InstanceSpec::new(n, seed));
        let all = ground(&d, &p, GroundOptions { prune_unreachable: false });
        let pruned: BTreeSet<ActionSig> = ground(&d, &p, GroundOptions::default()).iter().map(|a| a.sig()).collect();
        let all_sigs: BTreeSet<ActionSig> = all.iter().map(|a| a.sig()).collect();
        prop_assert!(pruned.is_subset(&all_sigs));
        let mut rng = ChaCha8Rng::seed_from_u64(walk);
        let plan = common::random_walk(&all, &p.init, 30, &mut rng);
        for s in plan.signatures() {
            prop_assert!(pruned.contains(&s), "{} was pruned", s);
        }
    }
}
