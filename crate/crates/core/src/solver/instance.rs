use std::cmp::Ordering;

use super::{travel_limit, SolverConfig};
use crate::error::Result;
use crate::metrics::focal_totals;
use crate::model::{District, TravelMatrix, TravelModel, FOCAL_GROUP};

/// Index-based view of a district under one configuration.
///
/// School balance is tracked as `x_s = w_s·N − n_s·W`; the objective
/// numerator is `Σ_s |x_s|` and a block's contribution to its school's
/// balance is `delta[b] = w_b·N − n_b·W`.
pub(crate) struct Instance<'a> {
    pub size: Vec<u64>,
    pub delta: Vec<i128>,
    pub status_quo: &'a [usize],
    /// Largest enrollment each school may take, `⌊σ · e_s⌋`.
    pub capacity: Vec<u64>,
    /// Schools each block may move to under the travel cap, status quo first
    /// then by increasing travel time.
    pub candidates: Vec<Vec<usize>>,
    /// Block positions in ascending block-id order, for tie-breaking.
    lex_blocks: Vec<usize>,
    /// Rank of each school by id, for tie-breaking.
    school_rank: Vec<usize>,
}

impl<'a> Instance<'a> {
    pub fn new(district: &'a District, matrix: &TravelMatrix, config: &SolverConfig) -> Result<Self> {
        let (focal_total, other_total) = focal_totals(district, FOCAL_GROUP)?;
        let (big_w, big_n) = (focal_total as i128, other_total as i128);
        let blocks = district.blocks();
        let status_quo = district.status_quo_indices();
        let size: Vec<u64> = blocks.iter().map(|b| b.students.total()).collect();
        let delta = blocks
            .iter()
            .map(|b| {
                let (w, n) = b.students.focal_split(FOCAL_GROUP);
                w as i128 * big_n - n as i128 * big_w
            })
            .collect();
        let capacity = district
            .schools()
            .iter()
            .map(|s| {
                let cap = config.capacity_scale_cap * s.status_quo_enrollment as f64;
                cap.floor() as u64
            })
            .collect();
        let candidates = candidate_lists(district, matrix, config.travel_increase_cap);

        let mut lex_blocks: Vec<usize> = (0..blocks.len()).collect();
        lex_blocks.sort_by(|&a, &b| blocks[a].id.cmp(&blocks[b].id));
        let mut by_id: Vec<usize> = (0..district.schools().len()).collect();
        by_id.sort_by(|&a, &b| district.schools()[a].id.cmp(&district.schools()[b].id));
        let mut school_rank = vec![0; by_id.len()];
        for (rank, &s) in by_id.iter().enumerate() {
            school_rank[s] = rank;
        }

        Ok(Self {
            size,
            delta,
            status_quo,
            capacity,
            candidates,
            lex_blocks,
            school_rank,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.size.len()
    }

    pub fn num_schools(&self) -> usize {
        self.capacity.len()
    }

    /// Objective numerator and switched students of a full assignment.
    pub fn evaluate(&self, schools: &[usize]) -> (u128, u64) {
        let mut balance = vec![0i128; self.num_schools()];
        let mut switched = 0;
        for b in 0..self.num_blocks() {
            balance[schools[b]] += self.delta[b];
            if schools[b] != self.status_quo[b] {
                switched += self.size[b];
            }
        }
        (balance.iter().map(|x| x.unsigned_abs()).sum(), switched)
    }

    /// Whether `schools` satisfies both caps, with empty blocks at the
    /// status quo.
    pub fn admits(&self, schools: &[usize]) -> bool {
        if schools.len() != self.num_blocks() {
            return false;
        }
        let mut load = vec![0u64; self.num_schools()];
        for (b, &s) in schools.iter().enumerate() {
            let ok = if self.size[b] == 0 {
                s == self.status_quo[b]
            } else {
                self.candidates[b].contains(&s)
            };
            if !ok {
                return false;
            }
            load[s] += self.size[b];
        }
        load.iter().zip(&self.capacity).all(|(l, c)| l <= c)
    }

    /// Best of the status quo and the admissible `incumbents`.
    pub fn starting_point(&self, incumbents: &[Vec<usize>]) -> Vec<usize> {
        let mut best = self.status_quo.to_vec();
        let (mut num, mut sw) = self.evaluate(&best);
        for cand in incumbents.iter().filter(|c| self.admits(c)) {
            let (n, s) = self.evaluate(cand);
            if self.cmp_solutions((cand, n, s), (&best, num, sw)).is_lt() {
                best.clone_from(cand);
                (num, sw) = (n, s);
            }
        }
        best
    }

    /// Lexicographic order of block → school-id mappings.
    pub fn cmp_mapping(&self, a: &[usize], b: &[usize]) -> Ordering {
        for &blk in &self.lex_blocks {
            let ord = self.school_rank[a[blk]].cmp(&self.school_rank[b[blk]]);
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }

    /// Full tie-break order: objective, then switched students, then mapping.
    pub fn cmp_solutions(&self, a: (&[usize], u128, u64), b: (&[usize], u128, u64)) -> Ordering {
        a.1.cmp(&b.1)
            .then(a.2.cmp(&b.2))
            .then_with(|| self.cmp_mapping(a.0, b.0))
    }
}

fn candidate_lists(district: &District, matrix: &TravelMatrix, tau: f64) -> Vec<Vec<usize>> {
    let status_quo = district.status_quo_indices();
    (0..district.blocks().len())
        .map(|b| {
            let q = status_quo[b];
            let limit = travel_limit(tau, matrix.get(b, q), matrix.floor());
            let mut allowed: Vec<usize> = (0..district.schools().len())
                .filter(|&s| s != q && matrix.get(b, s) <= limit)
                .collect();
            allowed.sort_by(|&x, &y| matrix.get(b, x).total_cmp(&matrix.get(b, y)).then(x.cmp(&y)));
            allowed.insert(0, q);
            allowed
        })
        .collect()
}

/// Number of travel-feasible assignments, ignoring capacity, saturating at
/// `u128::MAX`. Blocks without students are fixed to the status quo and
/// count once. Used to decide whether exhaustive search is affordable.
pub fn candidate_space(district: &District, tau: f64, model: &TravelModel) -> Result<u128> {
    let matrix = TravelMatrix::compute(district, model)?;
    let lists = candidate_lists(district, &matrix, tau);
    Ok(district
        .blocks()
        .iter()
        .zip(&lists)
        .filter(|(b, _)| b.students.total() > 0)
        .fold(1u128, |acc, (_, l)| acc.saturating_mul(l.len() as u128)))
}
