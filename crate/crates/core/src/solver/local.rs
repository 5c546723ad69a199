//! Seeded tabu search over single-block reassignments and two-block swaps.
//!
//! Every move is checked against both caps before it is scored, so the
//! search never leaves the feasible region. Each iteration takes the best
//! admissible single move if it improves; otherwise it also scans swaps and
//! takes the best of either kind, even if that worsens the objective. Moved
//! blocks are tabu for `tabu_tenure` iterations unless the move would beat
//! the best solution found so far. Restarts perturb the best solution with a
//! few random feasible moves drawn from the seeded generator.
//!
//! Results are deterministic for a fixed (district, config) as long as the
//! time limit is not reached.

use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instance::Instance;
use super::{build_result, prepare, RezoningResult, SolveStatus, SolverConfig, SolverMode};
use crate::error::Result;
use crate::model::{Assignment, District};

const DEADLINE_CHECK_INTERVAL: u32 = 256;

pub fn solve_local(district: &District, config: &SolverConfig) -> Result<RezoningResult> {
    solve_local_from(district, config, &[])
}

pub(crate) fn solve_local_from(
    district: &District,
    config: &SolverConfig,
    incumbents: &[Assignment],
) -> Result<RezoningResult> {
    let started = Instant::now();
    let config = SolverConfig {
        mode: SolverMode::LocalSearch,
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
    let mut search = TabuSearch::new(&instance, &config, start, deadline);
    search.run();
    build_result(
        district,
        &matrix,
        &search.best,
        SolveStatus::FeasibleTimeLimit,
        started,
        &config,
    )
}

#[derive(Clone)]
struct State {
    schools: Vec<usize>,
    balance: Vec<i128>,
    load: Vec<u64>,
    num: u128,
    switched: u64,
}

#[derive(Clone, Copy)]
enum Move {
    Single { block: usize, to: usize },
    Swap { a: usize, b: usize },
}

struct TabuSearch<'i, 'd> {
    inst: &'i Instance<'d>,
    allowed: Vec<bool>,
    movable: Vec<usize>,
    restarts: u32,
    max_iterations: u32,
    tenure: u64,
    rng: ChaCha8Rng,
    deadline: Option<Instant>,
    evaluations: u32,
    timed_out: bool,
    best: Vec<usize>,
    best_num: u128,
    best_switched: u64,
}

impl<'i, 'd> TabuSearch<'i, 'd> {
    fn new(inst: &'i Instance<'d>, config: &SolverConfig, best: Vec<usize>, deadline: Option<Instant>) -> Self {
        let k = inst.num_schools();
        let mut allowed = vec![false; inst.num_blocks() * k];
        for (b, list) in inst.candidates.iter().enumerate() {
            for &s in list {
                allowed[b * k + s] = true;
            }
        }
        let movable = (0..inst.num_blocks()).filter(|&b| inst.size[b] > 0).collect();
        let (best_num, best_switched) = inst.evaluate(&best);
        Self {
            inst,
            allowed,
            movable,
            restarts: config.local.restarts,
            max_iterations: config.local.max_iterations,
            tenure: config.local.tabu_tenure as u64,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            deadline,
            evaluations: 0,
            timed_out: false,
            best,
            best_num,
            best_switched,
        }
    }

    fn state_of(&self, schools: Vec<usize>) -> State {
        let k = self.inst.num_schools();
        let mut balance = vec![0i128; k];
        let mut load = vec![0u64; k];
        for (b, &s) in schools.iter().enumerate() {
            balance[s] += self.inst.delta[b];
            load[s] += self.inst.size[b];
        }
        let (num, switched) = self.inst.evaluate(&schools);
        State {
            schools,
            balance,
            load,
            num,
            switched,
        }
    }

    fn tick(&mut self) -> bool {
        self.evaluations = self.evaluations.wrapping_add(1);
        if self.evaluations.is_multiple_of(DEADLINE_CHECK_INTERVAL) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    fn run(&mut self) {
        if self.movable.is_empty() || self.deadline.is_some_and(|d| Instant::now() >= d) {
            return;
        }
        for restart in 0..=self.restarts {
            let mut state = self.state_of(self.best.clone());
            if restart > 0 {
                self.perturb(&mut state);
            }
            self.descend(&mut state);
            if self.timed_out {
                break;
            }
        }
    }

    #[inline]
    fn is_allowed(&self, block: usize, school: usize) -> bool {
        self.allowed[block * self.inst.num_schools() + school]
    }

    #[inline]
    fn switch_cost(&self, block: usize, school: usize) -> i64 {
        if school != self.inst.status_quo[block] {
            self.inst.size[block] as i64
        } else {
            0
        }
    }

    fn single_delta(&self, st: &State, block: usize, to: usize) -> Option<(i128, i64)> {
        let from = st.schools[block];
        let size = self.inst.size[block];
        if to == from || !self.is_allowed(block, to) || st.load[to] + size > self.inst.capacity[to] {
            return None;
        }
        let d = self.inst.delta[block];
        let (xf, xt) = (st.balance[from], st.balance[to]);
        let dnum = (xf - d).abs() - xf.abs() + (xt + d).abs() - xt.abs();
        let dsw = self.switch_cost(block, to) - self.switch_cost(block, from);
        Some((dnum, dsw))
    }

    fn swap_delta(&self, st: &State, a: usize, b: usize) -> Option<(i128, i64)> {
        let (sa, sb) = (st.schools[a], st.schools[b]);
        if sa == sb || !self.is_allowed(a, sb) || !self.is_allowed(b, sa) {
            return None;
        }
        let (za, zb) = (self.inst.size[a], self.inst.size[b]);
        if st.load[sa] - za + zb > self.inst.capacity[sa] || st.load[sb] - zb + za > self.inst.capacity[sb] {
            return None;
        }
        let (da, db) = (self.inst.delta[a], self.inst.delta[b]);
        let (xa, xb) = (st.balance[sa], st.balance[sb]);
        let dnum = (xa - da + db).abs() - xa.abs() + (xb - db + da).abs() - xb.abs();
        let dsw = self.switch_cost(a, sb) - self.switch_cost(a, sa) + self.switch_cost(b, sa)
            - self.switch_cost(b, sb);
        Some((dnum, dsw))
    }

    fn apply(&self, st: &mut State, mv: Move) {
        let relocate = |st: &mut State, block: usize, to: usize| {
            let from = st.schools[block];
            let (d, size) = (self.inst.delta[block], self.inst.size[block]);
            st.balance[from] -= d;
            st.load[from] -= size;
            st.balance[to] += d;
            st.load[to] += size;
            st.switched = (st.switched as i64 + self.switch_cost(block, to) - self.switch_cost(block, from)) as u64;
            st.schools[block] = to;
        };
        match mv {
            Move::Single { block, to } => relocate(st, block, to),
            Move::Swap { a, b } => {
                let (sa, sb) = (st.schools[a], st.schools[b]);
                relocate(st, b, sa);
                relocate(st, a, sb);
            }
        }
        st.num = st.balance.iter().map(|x| x.unsigned_abs()).sum();
    }

    fn record_if_best(&mut self, st: &State) {
        let better = self
            .inst
            .cmp_solutions(
                (&st.schools, st.num, st.switched),
                (&self.best, self.best_num, self.best_switched),
            )
            .is_lt();
        if better {
            self.best.clone_from(&st.schools);
            self.best_num = st.num;
            self.best_switched = st.switched;
        }
    }

    fn descend(&mut self, st: &mut State) {
        let mut tabu_until = vec![0u64; self.inst.num_blocks()];
        for iter in 1..=self.max_iterations as u64 {
            let aspires = |this: &Self, dnum: i128, dsw: i64| {
                let num = (st.num as i128 + dnum) as u128;
                let sw = (st.switched as i64 + dsw) as u64;
                (num, sw) < (this.best_num, this.best_switched)
            };

            let mut choice: Option<((i128, i64), Move)> = None;
            let consider = |choice: &mut Option<((i128, i64), Move)>, key: (i128, i64), mv: Move| {
                if choice.is_none_or(|(k, _)| key < k) {
                    *choice = Some((key, mv));
                }
            };

            for i in 0..self.movable.len() {
                let block = self.movable[i];
                for to in 0..self.inst.num_schools() {
                    if self.tick() {
                        return;
                    }
                    if let Some(key) = self.single_delta(st, block, to) {
                        if tabu_until[block] < iter || aspires(self, key.0, key.1) {
                            consider(&mut choice, key, Move::Single { block, to });
                        }
                    }
                }
            }

            let single_improves = choice.is_some_and(|((dnum, dsw), _)| (dnum, dsw) < (0, 0));
            if !single_improves {
                for i in 0..self.movable.len() {
                    for j in (i + 1)..self.movable.len() {
                        if self.tick() {
                            return;
                        }
                        let (a, b) = (self.movable[i], self.movable[j]);
                        if let Some(key) = self.swap_delta(st, a, b) {
                            let free = tabu_until[a] < iter && tabu_until[b] < iter;
                            if free || aspires(self, key.0, key.1) {
                                consider(&mut choice, key, Move::Swap { a, b });
                            }
                        }
                    }
                }
            }

            let Some((_, mv)) = choice else {
                return;
            };
            self.apply(st, mv);
            match mv {
                Move::Single { block, .. } => tabu_until[block] = iter + self.tenure,
                Move::Swap { a, b } => {
                    tabu_until[a] = iter + self.tenure;
                    tabu_until[b] = iter + self.tenure;
                }
            }
            self.record_if_best(st);
        }
    }

    fn perturb(&mut self, st: &mut State) {
        let kicks = (self.movable.len() / 10).max(2);
        let mut applied = 0;
        for _ in 0..kicks * 10 {
            if applied == kicks {
                break;
            }
            let block = self.movable[self.rng.random_range(0..self.movable.len())];
            let options: Vec<usize> = self.inst.candidates[block]
                .iter()
                .copied()
                .filter(|&to| self.single_delta(st, block, to).is_some())
                .collect();
            if let Some(&to) = options.choose(&mut self.rng) {
                self.apply(st, Move::Single { block, to });
                applied += 1;
            }
        }
        self.record_if_best(st);
    }
}
