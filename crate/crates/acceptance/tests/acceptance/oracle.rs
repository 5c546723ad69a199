//! Reference computations written from the definitions, sharing no code
//! with the library beyond its data types.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rezone_core::model::{Assignment, District};

const R_KM: f64 = 6371.0088;
const SPEED: f64 = 0.5;
const FLOOR: f64 = 2.0;

pub fn minutes(a: (f64, f64), b: (f64, f64)) -> f64 {
    if a == b {
        return 0.0;
    }
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let h = ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * ((b.1 - a.1).to_radians() / 2.0).sin().powi(2);
    let km = 2.0 * R_KM * h.sqrt().min(1.0).asin();
    (km / SPEED).max(FLOOR)
}

/// Plain-index copy of a district plus its feasible moves under (τ, σ).
pub struct Problem {
    pub white: Vec<u64>,
    pub other: Vec<u64>,
    pub status_quo: Vec<usize>,
    pub allowed: Vec<Vec<usize>>,
    pub enrollment: Vec<u64>,
    pub sigma: f64,
    pub school_ids: Vec<String>,
    pub block_ids: Vec<String>,
}

impl Problem {
    pub fn new(d: &District, tau: f64, sigma: f64) -> Self {
        let schools = d.schools();
        let pos: BTreeMap<&str, usize> = schools.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        let mut p = Problem {
            white: vec![],
            other: vec![],
            status_quo: vec![],
            allowed: vec![],
            enrollment: vec![0; schools.len()],
            sigma,
            school_ids: schools.iter().map(|s| s.id.clone()).collect(),
            block_ids: vec![],
        };
        for b in d.blocks() {
            let total: u64 = b.students.iter().map(|(_, c)| c).sum();
            let white = b.students.iter().filter(|(g, _)| *g == "white").map(|(_, c)| c).sum::<u64>();
            let q = pos[b.status_quo_school.as_str()];
            let at = (b.centroid.lat, b.centroid.lon);
            let loc = |s: usize| (schools[s].location.lat, schools[s].location.lon);
            let cap = (tau * minutes(at, loc(q))).max(FLOOR);
            p.allowed.push((0..schools.len()).filter(|&s| minutes(at, loc(s)) <= cap).collect());
            p.white.push(white);
            p.other.push(total - white);
            p.status_quo.push(q);
            p.enrollment[q] += total;
            p.block_ids.push(b.id.clone());
        }
        p
    }

    fn totals(&self) -> (u64, u64) {
        (self.white.iter().sum(), self.other.iter().sum())
    }

    /// ½ Σ_s |w_s/W − n_s/N|.
    pub fn dissimilarity(&self, schools: &[usize]) -> f64 {
        let (w, n) = self.totals();
        let mut per = vec![(0u64, 0u64); self.enrollment.len()];
        for (b, &s) in schools.iter().enumerate() {
            per[s].0 += self.white[b];
            per[s].1 += self.other[b];
        }
        per.iter()
            .map(|&(ws, ns)| (ws as f64 / w as f64 - ns as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0
    }

    pub fn feasible(&self, schools: &[usize]) -> bool {
        let mut load = vec![0u64; self.enrollment.len()];
        for (b, &s) in schools.iter().enumerate() {
            let size = self.white[b] + self.other[b];
            if size > 0 && !self.allowed[b].contains(&s) {
                return false;
            }
            load[s] += size;
        }
        load.iter()
            .zip(&self.enrollment)
            .all(|(&l, &e)| l as f64 <= self.sigma * e as f64)
    }

    pub fn indices(&self, a: &Assignment) -> Vec<usize> {
        self.block_ids
            .iter()
            .map(|b| {
                let s = a.school_of(b).expect("block assigned");
                self.school_ids.iter().position(|x| x == s).expect("known school")
            })
            .collect()
    }

    /// Minimum dissimilarity over every feasible assignment. Empty blocks
    /// stay put since they cannot change the objective.
    pub fn enumerate_min(&self) -> f64 {
        let (w, n) = (self.totals().0 as i128, self.totals().1 as i128);
        let movable: Vec<usize> = (0..self.white.len()).filter(|&b| self.white[b] + self.other[b] > 0).collect();
        let mut current = self.status_quo.clone();
        let mut digits = vec![0usize; movable.len()];
        let mut best = i128::MAX;
        loop {
            for (k, &b) in movable.iter().enumerate() {
                current[b] = self.allowed[b][digits[k]];
            }
            if self.feasible(&current) {
                let mut per = vec![(0i128, 0i128); self.enrollment.len()];
                for (b, &s) in current.iter().enumerate() {
                    per[s].0 += self.white[b] as i128;
                    per[s].1 += self.other[b] as i128;
                }
                let num: i128 = per.iter().map(|&(ws, ns)| (ws * n - ns * w).abs()).sum();
                best = best.min(num);
            }
            let mut k = 0;
            loop {
                if k == movable.len() {
                    return best as f64 / (2 * w * n) as f64;
                }
                digits[k] += 1;
                if digits[k] < self.allowed[movable[k]].len() {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
    }
}

/// Share of students whose school differs from the status quo.
pub fn percent_switched(p: &Problem, proposed: &[usize]) -> f64 {
    let total: u64 = p.white.iter().zip(&p.other).map(|(w, n)| w + n).sum();
    let moved: u64 = (0..proposed.len())
        .filter(|&b| proposed[b] != p.status_quo[b])
        .map(|b| p.white[b] + p.other[b])
        .sum();
    moved as f64 / total as f64
}

/// Poisson regression by Newton's method.
pub fn poisson_newton(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let y = DVector::from_column_slice(y);
    let mut beta = DVector::zeros(x.ncols());
    beta[0] = (y.mean()).ln();
    for _ in 0..200 {
        let mu = (x * &beta).map(f64::exp);
        let grad = x.transpose() * (&y - &mu);
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= mu[i];
        }
        let info = x.transpose() * xw;
        let step = info.cholesky().expect("positive definite").solve(&grad);
        beta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    beta.iter().copied().collect()
}

/// HC0 sandwich for a logistic fit at `beta`.
pub fn logistic_hc0(x: &DMatrix<f64>, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    let p = (x * b).map(|e| 1.0 / (1.0 + (-e).exp()));
    let k = x.ncols();
    let mut bread = DMatrix::zeros(k, k);
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..x.nrows() {
        let xi = x.row(i).transpose();
        bread += &xi * xi.transpose() * (p[i] * (1.0 - p[i]));
        let u = &xi * (y[i] - p[i]);
        meat += &u * u.transpose();
    }
    let inv = bread.try_inverse().expect("invertible");
    let v = &inv * meat * &inv;
    (0..k).map(|j| v[(j, j)].sqrt()).collect()
}
