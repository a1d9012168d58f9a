use std::collections::{BTreeSet, HashMap};

use super::ast::*;

#[derive(Debug, Clone, Copy)]
pub struct GroundOptions {
    /// Keep only actions whose preconditions are reachable from the initial
    /// state under the delete relaxation.
    pub prune_unreachable: bool,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            prune_unreachable: true,
        }
    }
}

/// Instantiates every action schema over the problem's objects.
///
/// Without pruning this is the full set of type-consistent instantiations.
/// With pruning, static preconditions are checked against the initial state
/// while parameters are bound, and a relaxed fixpoint removes the rest of the
/// unreachable actions. Output order is schema order, then lexicographic in
/// the arguments.
pub fn ground(domain: &Domain, problem: &Problem, opts: GroundOptions) -> Vec<GroundAction> {
    let statics = domain.static_predicates();
    let mut candidates = Vec::new();
    for schema in &domain.actions {
        let domains: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| problem.objects_of(&p.ty, &domain.types))
            .collect();
        // static literals become checkable once their last variable is bound
        let mut checks: Vec<Vec<&AtomTemplate>> = vec![Vec::new(); schema.params.len() + 1];
        if opts.prune_unreachable {
            for lit in schema.precondition.iter().filter(|l| statics.contains(l.predicate.as_str())) {
                let last = lit
                    .args
                    .iter()
                    .map(|v| schema.params.iter().position(|p| &p.name == v).unwrap() + 1)
                    .max()
                    .unwrap_or(0);
                checks[last].push(lit);
            }
        }
        let mut binding: Vec<&str> = Vec::with_capacity(schema.params.len());
        enumerate(schema, &domains, &checks, &problem.init, &mut binding, &mut candidates);
    }
    if !opts.prune_unreachable {
        return candidates;
    }
    relaxed_filter(candidates, &problem.init)
}

fn enumerate<'a>(
    schema: &ActionSchema,
    domains: &[Vec<&'a str>],
    checks: &[Vec<&AtomTemplate>],
    init: &State,
    binding: &mut Vec<&'a str>,
    out: &mut Vec<GroundAction>,
) {
    if !holds_bound(schema, &checks[binding.len()], binding, init) {
        return;
    }
    if binding.len() == domains.len() {
        let args: Vec<String> = binding.iter().map(|s| s.to_string()).collect();
        out.push(schema.instantiate(&args));
        return;
    }
    for &obj in &domains[binding.len()] {
        binding.push(obj);
        enumerate(schema, domains, checks, init, binding, out);
        binding.pop();
    }
}

fn holds_bound(schema: &ActionSchema, lits: &[&AtomTemplate], binding: &[&str], init: &State) -> bool {
    lits.iter().all(|lit| {
        let atom = GroundAtom {
            predicate: lit.predicate.clone(),
            args: lit
                .args
                .iter()
                .map(|v| {
                    let i = schema.params.iter().position(|p| &p.name == v).unwrap();
                    binding[i].to_string()
                })
                .collect(),
        };
        init.contains(&atom)
    })
}

/// Counter-based relaxed reachability: an action fires once all of its
/// preconditions have been reached.
fn relaxed_filter(actions: Vec<GroundAction>, init: &State) -> Vec<GroundAction> {
    let mut waiting: HashMap<&GroundAtom, Vec<usize>> = HashMap::new();
    let mut missing: Vec<usize> = Vec::with_capacity(actions.len());
    let mut reached: BTreeSet<&GroundAtom> = init.iter().collect();
    let mut queue: Vec<usize> = Vec::new();
    for (i, a) in actions.iter().enumerate() {
        let n = a.pre.iter().filter(|p| !reached.contains(p)).count();
        for p in a.pre.iter().filter(|p| !reached.contains(p)) {
            waiting.entry(p).or_default().push(i);
        }
        missing.push(n);
        if n == 0 {
            queue.push(i);
        }
    }
    let mut fired = vec![false; actions.len()];
    while let Some(i) = queue.pop() {
        if fired[i] {
            continue;
        }
        fired[i] = true;
        for atom in &actions[i].add {
            if reached.insert(atom) {
                if let Some(ws) = waiting.get(atom) {
                    for &w in ws {
                        missing[w] -= 1;
                        if missing[w] == 0 {
                            queue.push(w);
                        }
                    }
                }
            }
        }
    }
    actions
        .into_iter()
        .zip(fired)
        .filter_map(|(a, f)| f.then_some(a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    fn setup(objects: &str) -> (Domain, Problem) {
        let d = parse_domain(
            "(define (domain d) (:types thing)
               (:predicates (p ?x - thing) (q ?x - thing))
               (:action touch :parameters (?x - thing) :precondition () :effect (p ?x)))",
        )
        .unwrap();
        let p = parse_problem(
            &format!("(define (problem p) (:domain d) (:objects {objects}) (:init) (:goal (and)))"),
            &d,
        )
        .unwrap();
        (d, p)
    }

    #[test]
    fn one_param_three_objects() {
        let (d, p) = setup("a b c - thing");
        assert_eq!(ground(&d, &p, GroundOptions::default()).len(), 3);
    }

    #[test]
    fn no_objects_of_required_type() {
        let (d, p) = setup("");
        assert!(ground(&d, &p, GroundOptions::default()).is_empty());
    }

    #[test]
    fn pruning_drops_unreachable_preconditions() {
        let d = parse_domain(
            "(define (domain d) (:types thing)
               (:predicates (p ?x - thing) (q ?x - thing) (link ?x ?y - thing))
               (:action a :parameters (?x - thing) :precondition (p ?x) :effect (q ?x))
               (:action b :parameters (?x ?y - thing) :precondition (and (q ?x) (link ?x ?y)) :effect (p ?y)))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects u v w - thing)
               (:init (p u) (link u v)) (:goal (and)))",
            &d,
        )
        .unwrap();
        let all = ground(&d, &p, GroundOptions { prune_unreachable: false });
        assert_eq!(all.len(), 3 + 9);
        let pruned = ground(&d, &p, GroundOptions::default());
        let names: Vec<String> = pruned.iter().map(|a| a.to_string()).collect();
        assert_eq!(names, ["(a u)", "(a v)", "(b u v)"]);
    }
}
