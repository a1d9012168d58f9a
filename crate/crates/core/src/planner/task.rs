use std::collections::{BTreeSet, HashMap};

use fixedbitset::FixedBitSet;
use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::pddl::{ground, Domain, GroundAction, GroundAtom, GroundOptions, Problem};
use crate::Cost;

/// Integer-costed, interned form of a problem for search.
///
/// Atoms that appear in no precondition and no goal are dropped, and an
/// action is dropped when another action has the same preconditions and
/// deletes and a superset of its adds. Every soft goal gets an extra
/// "achieved" bit so that satisfaction follows the whole trajectory, not
/// just the final state.
pub(crate) struct Task {
    pub num_atoms: usize,
    pub actions: Vec<TaskAction>,
    /// Full ground action behind each entry of `actions`.
    pub ground: Vec<GroundAction>,
    pub init: FixedBitSet,
    pub hard_goals: Vec<usize>,
    pub soft_goals: Vec<TaskSoftGoal>,
    /// actions[a] for which the atom is a precondition.
    pub pre_of: Vec<Vec<u32>>,
    pub empty_pre: Vec<u32>,
    /// Scaled costs: objective = (w_len * len + penalties) / scale.
    pub scale: i64,
    pub w_len: i64,
}

pub(crate) struct TaskAction {
    pub pre: Vec<u32>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
    /// Soft goals whose atom this action adds.
    pub achieves: Vec<u32>,
}

pub(crate) struct TaskSoftGoal {
    pub atom: usize,
    pub penalty: i64,
}

impl Task {
    pub fn build(domain: &Domain, problem: &Problem, w_len: Cost, seed: u64) -> Task {
        let mut ground_actions = ground(domain, problem, GroundOptions::default());
        if seed != 0 {
            ground_actions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }

        let mut relevant: BTreeSet<GroundAtom> = problem.hard_goals.clone();
        relevant.extend(problem.soft_goals.values().map(|g| g.atom.clone()));
        for a in &ground_actions {
            relevant.extend(a.pre.iter().cloned());
        }
        let index: HashMap<GroundAtom, usize> = relevant.into_iter().enumerate().map(|(i, a)| (a, i)).collect();
        let num_atoms = index.len();
        let ids = |atoms: &BTreeSet<GroundAtom>| -> Vec<u32> {
            atoms.iter().filter_map(|a| index.get(a).map(|&i| i as u32)).collect()
        };

        let soft: Vec<(&GroundAtom, Cost)> = problem.soft_goals.values().map(|g| (&g.atom, g.penalty)).collect();
        let scale = soft
            .iter()
            .map(|(_, p)| *p.denom())
            .fold(*w_len.denom(), |acc, d| acc.lcm(&d));
        let scaled = |c: Cost| (c * Cost::from_integer(scale)).to_integer();
        let soft_goals: Vec<TaskSoftGoal> = soft
            .iter()
            .map(|(a, p)| TaskSoftGoal {
                atom: index[*a],
                penalty: scaled(*p),
            })
            .collect();

        let mut candidates: Vec<(TaskAction, GroundAction)> = ground_actions
            .into_iter()
            .map(|g| {
                let add = ids(&g.add);
                let achieves = soft_goals
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| add.contains(&(s.atom as u32)))
                    .map(|(i, _)| i as u32)
                    .collect();
                let t = TaskAction {
                    pre: ids(&g.pre),
                    add,
                    del: ids(&g.del),
                    achieves,
                };
                (t, g)
            })
            .collect();

        // dominance: same pre and del, add a subset of another's add
        let mut groups: HashMap<(Vec<u32>, Vec<u32>), Vec<usize>> = HashMap::new();
        for (i, (t, _)) in candidates.iter().enumerate() {
            groups.entry((t.pre.clone(), t.del.clone())).or_default().push(i);
        }
        let mut keep = vec![true; candidates.len()];
        for members in groups.values().filter(|m| m.len() > 1) {
            for &i in members {
                let dominated = members.iter().any(|&j| {
                    if i == j || !keep[j] {
                        return false;
                    }
                    let (a, b) = (&candidates[i].0.add, &candidates[j].0.add);
                    let subset = a.iter().all(|x| b.contains(x));
                    // equal adds: the first one survives
                    subset && (a.len() < b.len() || j < i)
                });
                if dominated {
                    keep[i] = false;
                }
            }
        }
        let mut kept = keep.iter();
        candidates.retain(|_| *kept.next().unwrap());

        let mut actions = Vec::with_capacity(candidates.len());
        let mut ground = Vec::with_capacity(candidates.len());
        for (t, g) in candidates {
            actions.push(t);
            ground.push(g);
        }

        let mut pre_of = vec![Vec::new(); num_atoms];
        let mut empty_pre = Vec::new();
        for (i, a) in actions.iter().enumerate() {
            if a.pre.is_empty() {
                empty_pre.push(i as u32);
            }
            for &p in &a.pre {
                pre_of[p as usize].push(i as u32);
            }
        }

        let mut init = FixedBitSet::with_capacity(num_atoms + soft_goals.len());
        for a in &problem.init {
            if let Some(&i) = index.get(a) {
                init.insert(i);
            }
        }
        for (i, s) in soft_goals.iter().enumerate() {
            if init.contains(s.atom) {
                init.insert(num_atoms + i);
            }
        }

        Task {
            num_atoms,
            hard_goals: problem.hard_goals.iter().map(|g| index[g]).collect(),
            actions,
            ground,
            init,
            soft_goals,
            pre_of,
            empty_pre,
            scale,
            w_len: scaled(w_len),
        }
    }

    pub fn applicable(&self, state: &FixedBitSet, a: &TaskAction) -> bool {
        a.pre.iter().all(|&p| state.contains(p as usize))
    }

    pub fn successor(&self, state: &FixedBitSet, a: &TaskAction) -> FixedBitSet {
        let mut next = state.clone();
        for &d in &a.del {
            next.set(d as usize, false);
        }
        for &x in &a.add {
            next.insert(x as usize);
        }
        for &s in &a.achieves {
            next.insert(self.num_atoms + s as usize);
        }
        next
    }

    pub fn is_goal(&self, state: &FixedBitSet) -> bool {
        self.hard_goals.iter().all(|&g| state.contains(g))
    }

    pub fn soft_achieved(&self, state: &FixedBitSet, i: usize) -> bool {
        state.contains(self.num_atoms + i)
    }

    /// Scaled penalty of soft goals not achieved along the path to `state`.
    pub fn penalty(&self, state: &FixedBitSet) -> i64 {
        self.soft_goals
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.soft_achieved(state, *i))
            .map(|(_, s)| s.penalty)
            .sum()
    }

    pub fn unscale(&self, v: i64) -> Cost {
        Cost::new(v, self.scale)
    }
}
