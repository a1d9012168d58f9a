use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{simulate, Plan, StepFailure, StateTrace};
use crate::pddl::{GroundAtom, Problem};

/// A ground state condition other agents may rely on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Commitment {
    pub atom: GroundAtom,
}

/// Every atom over `predicates` that some action of `plan` adds, after
/// checking that the plan executes from the problem's initial state.
pub fn extract_commitments(
    problem: &Problem,
    plan: &Plan,
    predicates: &BTreeSet<String>,
) -> Result<BTreeSet<Commitment>, StepFailure> {
    simulate(problem, plan)?;
    Ok(plan
        .steps()
        .iter()
        .flat_map(|a| a.add.iter())
        .filter(|atom| predicates.contains(&atom.predicate))
        .map(|atom| Commitment { atom: atom.clone() })
        .collect())
}

/// Commitments that hold somewhere along `trace` (its first state included).
pub fn honored_commitments<'a>(
    commitments: &'a BTreeSet<Commitment>,
    trace: &StateTrace,
) -> BTreeSet<&'a Commitment> {
    commitments.iter().filter(|c| trace.ever_holds(&c.atom)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem, Domain};

    fn world() -> (Domain, Problem) {
        let d = parse_domain(
            "(define (domain w) (:types forklift package shelf gridsquare packager)
               (:predicates (holding ?f - forklift ?p - package) (stocked ?p - package ?s - shelf)
                            (delivered ?p - package ?k - packager) (at ?f - forklift ?g - gridsquare))
               (:action unstock :parameters (?f - forklift ?p - package ?s - shelf ?g - gridsquare)
                 :precondition (and (stocked ?p ?s) (at ?f ?g))
                 :effect (and (holding ?f ?p) (not (stocked ?p ?s))))
               (:action drop :parameters (?f - forklift ?p - package ?k - packager)
                 :precondition (holding ?f ?p) :effect (delivered ?p ?k))
               (:action move :parameters (?f - forklift ?a ?b - gridsquare)
                 :precondition (at ?f ?a) :effect (and (at ?f ?b) (not (at ?f ?a)))))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain w)
               (:objects f1 - forklift p1 - package s1 - shelf g1 g2 - gridsquare pk1 - packager)
               (:init (stocked p1 s1) (at f1 g1)) (:goal (and)))",
            &d,
        )
        .unwrap();
        (d, p)
    }

    fn preds(ps: &[&str]) -> BTreeSet<String> {
        ps.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unstock_commits_to_holding() {
        let (d, p) = world();
        let plan = Plan::parse("(unstock f1 p1 s1 g1)", &d, &p).unwrap();
        let c = extract_commitments(&p, &plan, &preds(&["holding"])).unwrap();
        let expected: BTreeSet<Commitment> = [Commitment {
            atom: GroundAtom::new("holding", &["f1", "p1"]),
        }]
        .into();
        assert_eq!(c, expected);
    }

    #[test]
    fn empty_plan_has_no_commitments() {
        let (_, p) = world();
        assert!(extract_commitments(&p, &Plan::default(), &preds(&["holding"]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn repeated_effects_deduplicate() {
        let (d, p) = world();
        let plan = Plan::parse(
            "(unstock f1 p1 s1 g1)\n(drop f1 p1 pk1)\n(drop f1 p1 pk1)",
            &d,
            &p,
        )
        .unwrap();
        let c = extract_commitments(&p, &plan, &preds(&["delivered"])).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn invalid_plan_propagates_failure() {
        let (d, p) = world();
        let plan = Plan::parse("(drop f1 p1 pk1)", &d, &p).unwrap();
        assert_eq!(extract_commitments(&p, &plan, &preds(&["delivered"])).unwrap_err().index, 0);
    }

    #[test]
    fn appending_irrelevant_actions_changes_nothing() {
        let (d, p) = world();
        let base = Plan::parse("(unstock f1 p1 s1 g1)", &d, &p).unwrap();
        let longer = Plan::parse("(unstock f1 p1 s1 g1)\n(move f1 g1 g2)\n(move f1 g2 g1)", &d, &p).unwrap();
        let ps = preds(&["holding", "delivered"]);
        assert_eq!(
            extract_commitments(&p, &base, &ps).unwrap(),
            extract_commitments(&p, &longer, &ps).unwrap()
        );
    }
}
