use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Plan;
use crate::pddl::ActionSig;

/// Action-level distance between an old plan Π and a new plan Π′.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanDiffMetrics {
    /// |Π \ Π′|: old actions not retained.
    pub set_diff: usize,
    /// |Π △ Π′|.
    pub sym_diff: usize,
}

/// Compares plans as sets of action signatures; positions and repeats are
/// ignored.
pub fn plan_diff(old: &Plan, new: &Plan) -> PlanDiffMetrics {
    let old: BTreeSet<ActionSig> = old.signatures().collect();
    let new: BTreeSet<ActionSig> = new.signatures().collect();
    let lost = old.difference(&new).count();
    let gained = new.difference(&old).count();
    PlanDiffMetrics {
        set_diff: lost,
        sym_diff: lost + gained,
    }
}

/// Multiset variant: a signature repeated k times in Π needs k occurrences in
/// Π′ to be fully retained.
pub fn plan_diff_multiset(old: &Plan, new: &Plan) -> PlanDiffMetrics {
    let count = |p: &Plan| {
        let mut m: BTreeMap<ActionSig, usize> = BTreeMap::new();
        for s in p.signatures() {
            *m.entry(s).or_default() += 1;
        }
        m
    };
    let (old, new) = (count(old), count(new));
    let excess = |a: &BTreeMap<ActionSig, usize>, b: &BTreeMap<ActionSig, usize>| -> usize {
        a.iter()
            .map(|(s, n)| n.saturating_sub(b.get(s).copied().unwrap_or(0)))
            .sum()
    };
    let lost = excess(&old, &new);
    PlanDiffMetrics {
        set_diff: lost,
        sym_diff: lost + excess(&new, &old),
    }
}
