//! Constrained rezoning: minimize White/non-White dissimilarity subject to a
//! per-block travel-increase cap and a per-school enrollment cap.
//!
//! Both caps are relative to the status quo, so the status quo is always
//! feasible and serves as the initial incumbent for every solver:
//!
//! * travel: `t(b, new) ≤ max(τ · t(b, current), floor)`
//! * capacity: `enrollment(s) ≤ σ · status_quo_enrollment(s)`
//!
//! [`solve_exact`] is a depth-first branch and bound that proves optimality on
//! small districts. [`solve_local`] is a seeded tabu search for everything
//! else. Ties between equal-objective assignments go to fewer switched
//! students, then to the lexicographically smallest block → school mapping.

mod exact;
mod instance;
mod local;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    school_deltas_indices, segregation_report_indices, travel_deltas_indices, IndexScope,
    SchoolDelta, SegregationReport, TravelDeltaReport,
};
use crate::model::{Assignment, District, TravelMatrix, TravelModel, FOCAL_GROUP};

pub use exact::solve_exact;
pub use instance::candidate_space;
pub use local::solve_local;

use instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Exact,
    LocalSearch,
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverMode::Exact),
            "local" | "local_search" => Ok(SolverMode::LocalSearch),
            other => Err(Error::Config(format!("unknown solver mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSearchParams {
    pub restarts: u32,
    pub max_iterations: u32,
    pub tabu_tenure: u32,
}

impl Default for LocalSearchParams {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iterations: 200,
            tabu_tenure: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// τ: multiplicative cap on each block's status-quo travel time.
    pub travel_increase_cap: f64,
    /// σ: multiplicative cap on each school's status-quo enrollment.
    pub capacity_scale_cap: f64,
    pub time_limit_secs: f64,
    pub seed: u64,
    pub mode: SolverMode,
    #[serde(default)]
    pub local: LocalSearchParams,
    #[serde(default)]
    pub travel_model: TravelModel,
    #[serde(default)]
    pub index_scope: IndexScope,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            travel_increase_cap: 1.5,
            capacity_scale_cap: 1.1,
            time_limit_secs: 60.0,
            seed: 0,
            mode: SolverMode::LocalSearch,
            local: LocalSearchParams::default(),
            travel_model: TravelModel::default(),
            index_scope: IndexScope::AllSchools,
        }
    }
}

impl SolverConfig {
    pub fn new(tau: f64, sigma: f64) -> Self {
        Self {
            travel_increase_cap: tau,
            capacity_scale_cap: sigma,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: SolverMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_time_limit(mut self, secs: f64) -> Self {
        self.time_limit_secs = secs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.travel_increase_cap;
        let sigma = self.capacity_scale_cap;
        if !(tau.is_finite() && tau >= 1.0) {
            return Err(Error::Config(format!("travel_increase_cap must be >= 1, got {tau}")));
        }
        if !(sigma.is_finite() && sigma >= 1.0) {
            return Err(Error::Config(format!("capacity_scale_cap must be >= 1, got {sigma}")));
        }
        if !(self.time_limit_secs.is_finite() && self.time_limit_secs > 0.0) {
            return Err(Error::Config(format!(
                "time_limit_secs must be > 0, got {}",
                self.time_limit_secs
            )));
        }
        self.travel_model
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    StatusQuoReturned,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeLimit => "feasible_time_limit",
            SolveStatus::StatusQuoReturned => "status_quo_returned",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RezoningResult {
    pub assignment: Assignment,
    pub report: SegregationReport,
    pub school_deltas: Vec<SchoolDelta>,
    pub travel_deltas: TravelDeltaReport,
    pub status: SolveStatus,
    /// Dissimilarity of `assignment`, focal group "white".
    pub objective: f64,
    pub solve_seconds: f64,
    pub config_echo: SolverConfig,
}

impl RezoningResult {
    /// Copy with wall-clock time zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            solve_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Solves with the method selected by `config.mode`.
pub fn solve(district: &District, config: &SolverConfig) -> Result<RezoningResult> {
    match config.mode {
        SolverMode::Exact => solve_exact(district, config),
        SolverMode::LocalSearch => solve_local(district, config),
    }
}

/// Like [`solve`], but any of `incumbents` that is feasible under `config`
/// may replace the status quo as the starting incumbent. The result is never
/// worse than the best feasible incumbent.
pub fn solve_with_incumbents(
    district: &District,
    config: &SolverConfig,
    incumbents: &[Assignment],
) -> Result<RezoningResult> {
    match config.mode {
        SolverMode::Exact => exact::solve_exact_from(district, config, incumbents),
        SolverMode::LocalSearch => local::solve_local_from(district, config, incumbents),
    }
}

fn incumbent_indices(district: &District, incumbents: &[Assignment]) -> Vec<Vec<usize>> {
    incumbents
        .iter()
        .filter_map(|a| district.assignment_indices(a).ok())
        .collect()
}

pub(crate) fn build_result(
    district: &District,
    matrix: &TravelMatrix,
    schools: &[usize],
    status: SolveStatus,
    started: Instant,
    config: &SolverConfig,
) -> Result<RezoningResult> {
    let report = segregation_report_indices(district, schools, FOCAL_GROUP)?;
    Ok(RezoningResult {
        assignment: district.assignment_from_indices(schools),
        objective: report.dissimilarity_proposed,
        report,
        school_deltas: school_deltas_indices(district, schools),
        travel_deltas: travel_deltas_indices(district, schools, matrix),
        status,
        solve_seconds: started.elapsed().as_secs_f64(),
        config_echo: config.clone(),
    })
}

/// Shared preamble of both solvers. Returns `Ok(Err(result))` when the
/// district has a single school and the status quo is the only option.
pub(crate) fn prepare<'a>(
    district: &'a District,
    config: &SolverConfig,
    started: Instant,
) -> Result<std::result::Result<(Instance<'a>, TravelMatrix), RezoningResult>> {
    config.validate()?;
    let matrix = TravelMatrix::compute(district, &config.travel_model)?;
    if district.schools().len() <= 1 {
        // Still surfaces a missing group as an error from the metrics.
        let result = build_result(
            district,
            &matrix,
            district.status_quo_indices(),
            SolveStatus::StatusQuoReturned,
            started,
            config,
        )?;
        return Ok(Err(result));
    }
    let instance = Instance::new(district, &matrix, config)?;
    Ok(Ok((instance, matrix)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Travel {
        block: String,
        proposed_minutes: f64,
        limit_minutes: f64,
    },
    Capacity {
        school: String,
        enrollment: u64,
        limit: f64,
    },
    Unassigned {
        block: String,
    },
    UnknownSchool {
        block: String,
        school: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Travel { block, proposed_minutes, limit_minutes } => write!(
                f,
                "block {block}: travel {proposed_minutes:.2} min exceeds limit {limit_minutes:.2} min"
            ),
            Violation::Capacity { school, enrollment, limit } => {
                write!(f, "school {school}: enrollment {enrollment} exceeds limit {limit:.2}")
            }
            Violation::Unassigned { block } => write!(f, "block {block}: unassigned"),
            Violation::UnknownSchool { block, school } => {
                write!(f, "block {block}: assigned to unknown school {school}")
            }
        }
    }
}

/// Travel limit for one block: `max(τ · baseline, floor)`.
#[inline]
pub(crate) fn travel_limit(tau: f64, baseline: f64, floor: f64) -> f64 {
    (tau * baseline).max(floor)
}

/// Capacity test shared by the solvers and the checker.
#[inline]
pub(crate) fn within_capacity(enrollment: u64, sigma: f64, status_quo_enrollment: u64) -> bool {
    enrollment as f64 <= sigma * status_quo_enrollment as f64
}

/// Lists every constraint `assignment` breaks under `config`; empty means
/// feasible.
pub fn check_feasible(
    district: &District,
    assignment: &Assignment,
    config: &SolverConfig,
) -> Result<Vec<Violation>> {
    config.validate()?;
    let matrix = TravelMatrix::compute(district, &config.travel_model)?;
    Ok(check_feasible_with(district, assignment, config, &matrix))
}

pub fn check_feasible_with(
    district: &District,
    assignment: &Assignment,
    config: &SolverConfig,
    matrix: &TravelMatrix,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut enrollment = vec![0u64; district.schools().len()];
    for (b, block) in district.blocks().iter().enumerate() {
        let Some(school_id) = assignment.school_of(&block.id) else {
            violations.push(Violation::Unassigned { block: block.id.clone() });
            continue;
        };
        let Some(s) = district.school_position(school_id) else {
            violations.push(Violation::UnknownSchool {
                block: block.id.clone(),
                school: school_id.to_owned(),
            });
            continue;
        };
        enrollment[s] += block.students.total();
        let q = district.status_quo_indices()[b];
        let limit = travel_limit(config.travel_increase_cap, matrix.get(b, q), matrix.floor());
        let proposed = matrix.get(b, s);
        if proposed > limit {
            violations.push(Violation::Travel {
                block: block.id.clone(),
                proposed_minutes: proposed,
                limit_minutes: limit,
            });
        }
    }
    for (school, &e) in district.schools().iter().zip(&enrollment) {
        if !within_capacity(e, config.capacity_scale_cap, school.status_quo_enrollment) {
            violations.push(Violation::Capacity {
                school: school.id.clone(),
                enrollment: e,
                limit: config.capacity_scale_cap * school.status_quo_enrollment as f64,
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tests::district;

    #[test]
    fn status_quo_is_always_feasible() {
        let d = district(
            &[("a", 0.0), ("b", 0.1)],
            &[("1", "a", 4, 1, 0.01), ("2", "b", 1, 4, 0.09), ("3", "a", 3, 3, 0.0)],
        );
        for (tau, sigma) in [(1.0, 1.0), (1.5, 1.1), (3.0, 2.0)] {
            let cfg = SolverConfig::new(tau, sigma);
            assert!(check_feasible(&d, &d.status_quo(), &cfg).unwrap().is_empty());
        }
    }

    #[test]
    fn tripled_travel_under_tau_two_is_one_violation() {
        // Block 1 sits 0.05° from a and 0.15° from b: three times as far.
        let d = district(
            &[("a", 0.0), ("b", 0.2)],
            &[("1", "a", 50, 50, 0.05), ("2", "b", 1, 1, 0.2)],
        );
        let cfg = SolverConfig::new(2.0, 100.0);
        let moved: Assignment = [("1", "b"), ("2", "b")].into_iter().collect();
        let v = check_feasible(&d, &moved, &cfg).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        match &v[0] {
            Violation::Travel { block, proposed_minutes, limit_minutes } => {
                assert_eq!(block, "1");
                assert!((proposed_minutes / limit_minutes - 1.5).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overfilled_school_hand_tally() {
        // Status quo: a = 50 + 50 = 100 students, b = 10 + 10 = 20.
        // Moving block 3 (10 students) from b to a gives a = 110 > 1.05 · 100.
        let d = district(
            &[("a", 0.0), ("b", 0.001)],
            &[("1", "a", 25, 25, 0.0), ("2", "a", 25, 25, 0.0), ("3", "b", 5, 5, 0.001), ("4", "b", 5, 5, 0.001)],
        );
        let cfg = SolverConfig::new(10.0, 1.05);
        let moved: Assignment = [("1", "a"), ("2", "a"), ("3", "a"), ("4", "b")].into_iter().collect();
        let v = check_feasible(&d, &moved, &cfg).unwrap();
        assert_eq!(
            v,
            vec![Violation::Capacity { school: "a".into(), enrollment: 110, limit: 105.0 }]
        );
    }

    #[test]
    fn partial_assignment_reports_unassigned() {
        let d = district(&[("a", 0.0), ("b", 0.1)], &[("1", "a", 1, 1, 0.0), ("2", "b", 1, 1, 0.1)]);
        let partial: Assignment = [("1", "a"), ("2", "zz")].into_iter().collect();
        let v = check_feasible(&d, &partial, &SolverConfig::default()).unwrap();
        assert!(matches!(&v[0], Violation::UnknownSchool { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.9, 1.0).validate().is_err());
        assert!(SolverConfig::new(1.0, 0.5).validate().is_err());
        assert!(SolverConfig::new(1.0, 1.0).with_time_limit(0.0).validate().is_err());
        assert!(SolverConfig::new(1.0, 1.0).validate().is_ok());
    }
}
