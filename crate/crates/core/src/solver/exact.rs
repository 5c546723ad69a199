//! Depth-first branch and bound.
//!
//! Blocks are fixed in descending order of student count. At each node the
//! partial school balances split into a positive mass `P = Σ max(x_s, 0)` and
//! a negative mass `Q = Σ max(−x_s, 0)`. An unassigned block with negative
//! delta can only shrink `P` (by at most its magnitude), and one with positive
//! delta can only shrink `Q`, so
//!
//! ```text
//! LB = max(0, P − Σ_unassigned |δ⁻|) + max(0, Q − Σ_unassigned δ⁺)
//! ```
//!
//! bounds every completion's numerator from below. A subtree is cut when
//! `(LB, switched so far)` is lexicographically worse than the incumbent.

use std::time::{Duration, Instant};

use super::instance::Instance;
use super::{build_result, prepare, RezoningResult, SolveStatus, SolverConfig, SolverMode};
use crate::error::Result;
use crate::model::{Assignment, District};

const DEADLINE_CHECK_INTERVAL: u64 = 1024;

/// Provably optimal rezoning when the search completes within the time
/// limit; otherwise the best incumbent with `feasible_time_limit`.
///
/// Practical up to roughly 25 populated blocks over 4 schools; past that the
/// time limit is the only guard.
pub fn solve_exact(district: &District, config: &SolverConfig) -> Result<RezoningResult> {
    solve_exact_from(district, config, &[])
}

pub(crate) fn solve_exact_from(
    district: &District,
    config: &SolverConfig,
    incumbents: &[Assignment],
) -> Result<RezoningResult> {
    let started = Instant::now();
    let config = SolverConfig {
        mode: SolverMode::Exact,
        ..config.clone()
    };
    let (instance, matrix) = match prepare(district, &config, started)? {
        Ok(prepared) => prepared,
        Err(single_school) => return Ok(single_school),
    };
    let deadline = Duration::try_from_secs_f64(config.time_limit_secs)
        .ok()
        .and_then(|d| started.checked_add(d));

    let start = instance.starting_point(&super::incumbent_indices(district, incumbents));
    let mut search = Search::new(&instance, start, deadline);
    search.dfs(0, 0);
    let status = if search.aborted {
        SolveStatus::FeasibleTimeLimit
    } else {
        SolveStatus::Optimal
    };
    build_result(district, &matrix, &search.best, status, started, &config)
}

struct Search<'i, 'd> {
    inst: &'i Instance<'d>,
    order: Vec<usize>,
    rem_pos: Vec<u128>,
    rem_neg: Vec<u128>,
    current: Vec<usize>,
    balance: Vec<i128>,
    load: Vec<u64>,
    pos_mass: u128,
    neg_mass: u128,
    best: Vec<usize>,
    best_num: u128,
    best_switched: u64,
    scratch: Vec<Vec<(u128, u64, usize)>>,
    nodes: u64,
    deadline: Option<Instant>,
    aborted: bool,
}

impl<'i, 'd> Search<'i, 'd> {
    fn new(inst: &'i Instance<'d>, start: Vec<usize>, deadline: Option<Instant>) -> Self {
        let mut order: Vec<usize> = (0..inst.num_blocks()).filter(|&b| inst.size[b] > 0).collect();
        order.sort_by(|&a, &b| inst.size[b].cmp(&inst.size[a]).then(a.cmp(&b)));

        let mut rem_pos = vec![0u128; order.len() + 1];
        let mut rem_neg = vec![0u128; order.len() + 1];
        for k in (0..order.len()).rev() {
            let d = inst.delta[order[k]];
            rem_pos[k] = rem_pos[k + 1] + d.max(0) as u128;
            rem_neg[k] = rem_neg[k + 1] + (-d).max(0) as u128;
        }

        let (best_num, best_switched) = inst.evaluate(&start);
        Self {
            inst,
            scratch: vec![Vec::with_capacity(inst.num_schools()); order.len()],
            order,
            rem_pos,
            rem_neg,
            current: inst.status_quo.to_vec(),
            balance: vec![0; inst.num_schools()],
            load: vec![0; inst.num_schools()],
            pos_mass: 0,
            neg_mass: 0,
            best: start,
            best_num,
            best_switched,
            nodes: 0,
            deadline,
            aborted: false,
        }
    }

    #[inline]
    fn masses_after(&self, school: usize, delta: i128) -> (u128, u128) {
        let old = self.balance[school];
        let new = old + delta;
        let pos = self.pos_mass - old.max(0) as u128 + new.max(0) as u128;
        let neg = self.neg_mass - (-old).max(0) as u128 + (-new).max(0) as u128;
        (pos, neg)
    }

    #[inline]
    fn bound(&self, pos: u128, neg: u128, depth: usize) -> u128 {
        pos.saturating_sub(self.rem_neg[depth]) + neg.saturating_sub(self.rem_pos[depth])
    }

    #[inline]
    fn worse_than_incumbent(&self, bound: u128, switched: u64) -> bool {
        (bound, switched) > (self.best_num, self.best_switched)
    }

    fn dfs(&mut self, depth: usize, switched: u64) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(DEADLINE_CHECK_INTERVAL) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.aborted = true;
                }
            }
        }
        if self.aborted {
            return;
        }

        if depth == self.order.len() {
            let num = self.pos_mass + self.neg_mass;
            let better = self
                .inst
                .cmp_solutions(
                    (&self.current, num, switched),
                    (&self.best, self.best_num, self.best_switched),
                )
                .is_lt();
            if better {
                self.best.clone_from(&self.current);
                self.best_num = num;
                self.best_switched = switched;
            }
            return;
        }

        if self.worse_than_incumbent(self.bound(self.pos_mass, self.neg_mass, depth), switched) {
            return;
        }

        let inst = self.inst;
        let b = self.order[depth];
        let (size, delta) = (inst.size[b], inst.delta[b]);

        // Children ordered by their own bound so good incumbents come early.
        let mut children = std::mem::take(&mut self.scratch[depth]);
        children.clear();
        for &s in &inst.candidates[b] {
            if self.load[s] + size > inst.capacity[s] {
                continue;
            }
            let (pos, neg) = self.masses_after(s, delta);
            let child_switched = switched + if s != inst.status_quo[b] { size } else { 0 };
            children.push((self.bound(pos, neg, depth + 1), child_switched, s));
        }
        children.sort_unstable();

        for &(bound, child_switched, s) in &children {
            if self.worse_than_incumbent(bound, child_switched) {
                // Sorted by (bound, switched): the rest are no better.
                break;
            }
            let (pos, neg) = self.masses_after(s, delta);
            let (saved_pos, saved_neg) = (self.pos_mass, self.neg_mass);
            self.balance[s] += delta;
            self.load[s] += size;
            self.pos_mass = pos;
            self.neg_mass = neg;
            self.current[b] = s;

            self.dfs(depth + 1, child_switched);

            self.balance[s] -= delta;
            self.load[s] -= size;
            self.pos_mass = saved_pos;
            self.neg_mass = saved_neg;
            self.current[b] = inst.status_quo[b];
            if self.aborted {
                break;
            }
        }
        self.scratch[depth] = children;
    }
}
