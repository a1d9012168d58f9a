use fixedbitset::FixedBitSet;

use super::task::Task;
use super::HeuristicKind;

const UNREACHED: u32 = u32::MAX;

/// Delete-relaxation estimates for one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Estimate {
    /// Relaxed plan length (or goal count) for the open hard goals plus the
    /// open soft goals that are still relaxed-reachable.
    pub h: u32,
    /// Max level over the open hard goals; admissible for plan length.
    pub h_max: u32,
    /// Scaled penalty of open soft goals that are relaxed-unreachable and
    /// therefore certainly lost.
    pub residual: i64,
    /// Open soft goals, reachable or not.
    pub open_soft: u32,
    /// False when some hard goal is relaxed-unreachable.
    pub alive: bool,
}

/// Reusable buffers for relaxed exploration.
pub(crate) struct Relaxation {
    level: Vec<u32>,
    achiever: Vec<u32>,
    missing: Vec<u32>,
    marked: Vec<bool>,
    stack: Vec<u32>,
}

impl Relaxation {
    pub fn new(task: &Task) -> Self {
        Relaxation {
            level: vec![UNREACHED; task.num_atoms],
            achiever: vec![UNREACHED; task.num_atoms],
            missing: vec![0; task.actions.len()],
            marked: vec![false; task.actions.len()],
            stack: Vec::new(),
        }
    }

    pub fn estimate(&mut self, task: &Task, state: &FixedBitSet, kind: HeuristicKind) -> Estimate {
        self.explore(task, state);

        let mut alive = true;
        let mut h_max = 0;
        let mut targets: Vec<usize> = Vec::new();
        for &g in &task.hard_goals {
            let l = self.level[g];
            if l == UNREACHED {
                alive = false;
            } else if l > 0 {
                h_max = h_max.max(l);
                targets.push(g);
            }
        }
        let mut residual = 0;
        let mut open_soft = 0;
        for (i, s) in task.soft_goals.iter().enumerate() {
            if task.soft_achieved(state, i) {
                continue;
            }
            open_soft += 1;
            // an atom that holds always has its achieved bit set, so an
            // open soft goal is never at level 0
            match self.level[s.atom] {
                UNREACHED => residual += s.penalty,
                _ if s.penalty > 0 => targets.push(s.atom),
                _ => {}
            }
        }

        let h = if !alive {
            UNREACHED
        } else {
            match kind {
                HeuristicKind::GoalCount => targets.len() as u32,
                HeuristicKind::RelaxedPlan => self.relaxed_plan(task, &targets),
            }
        };
        Estimate {
            h,
            h_max,
            residual,
            open_soft,
            alive,
        }
    }

    /// Breadth-first relaxed exploration: level[x] is the first layer in
    /// which x holds, achiever[x] the first action adding it.
    fn explore(&mut self, task: &Task, state: &FixedBitSet) {
        self.level.fill(UNREACHED);
        self.achiever.fill(UNREACHED);
        for (m, a) in self.missing.iter_mut().zip(&task.actions) {
            *m = a.pre.len() as u32;
        }
        let mut ready: Vec<u32> = task.empty_pre.clone();
        for x in state.ones().filter(|&x| x < task.num_atoms) {
            self.level[x] = 0;
            for &a in &task.pre_of[x] {
                self.missing[a as usize] -= 1;
                if self.missing[a as usize] == 0 {
                    ready.push(a);
                }
            }
        }
        let mut layer = 0;
        while !ready.is_empty() {
            let mut fresh = Vec::new();
            for &a in &ready {
                for &x in &task.actions[a as usize].add {
                    let x = x as usize;
                    if self.level[x] == UNREACHED {
                        self.level[x] = layer + 1;
                        self.achiever[x] = a;
                        fresh.push(x);
                    }
                }
            }
            let mut next = Vec::new();
            for x in fresh {
                for &a in &task.pre_of[x] {
                    self.missing[a as usize] -= 1;
                    if self.missing[a as usize] == 0 {
                        next.push(a);
                    }
                }
            }
            ready = next;
            layer += 1;
        }
    }

    /// Number of distinct achievers needed to support `targets`.
    fn relaxed_plan(&mut self, task: &Task, targets: &[usize]) -> u32 {
        self.marked.fill(false);
        self.stack.clear();
        self.stack.extend(targets.iter().map(|&t| t as u32));
        let mut count = 0;
        while let Some(x) = self.stack.pop() {
            let x = x as usize;
            if self.level[x] == 0 || self.level[x] == UNREACHED {
                continue;
            }
            let a = self.achiever[x] as usize;
            if self.marked[a] {
                continue;
            }
            self.marked[a] = true;
            count += 1;
            self.stack.extend(task.actions[a].pre.iter().copied());
        }
        count
    }
}
