//! Segregation and impact metrics for a proposed assignment.
//!
//! The two-group dissimilarity index over schools `s` is
//!
//! ```text
//! D = ½ Σ_s | w_s / W − n_s / N |
//! ```
//!
//! where `w_s` counts focal-group students at `s`, `n_s` everyone else, and
//! `W`, `N` are the district totals. Multiplying through by `W·N` gives an
//! integer numerator `Σ_s |w_s·N − n_s·W|`, which is what the solvers compare;
//! ties between assignments are therefore exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, District, TravelMatrix, TravelModel};

/// Which schools enter the index sum.
///
/// An empty school has `w_s = n_s = 0` and contributes `|0 − 0| = 0`, so both
/// scopes give the same value; the switch exists so callers can state which
/// convention they mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexScope {
    #[default]
    AllSchools,
    NonEmptySchools,
}

/// Exact pieces of the dissimilarity index for one assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DissimilarityParts {
    pub numerator: u128,
    pub focal_total: u64,
    pub other_total: u64,
}

impl DissimilarityParts {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / (2.0 * self.focal_total as f64 * self.other_total as f64)
    }
}

/// `|w·N − n·W|` for one school's counts.
#[inline]
pub(crate) fn school_term(w: u64, n: u64, focal_total: u64, other_total: u64) -> u128 {
    let a = w as u128 * other_total as u128;
    let b = n as u128 * focal_total as u128;
    a.abs_diff(b)
}

pub(crate) fn focal_totals(district: &District, focal: &str) -> Result<(u64, u64)> {
    let (w, n) = district
        .blocks()
        .iter()
        .map(|b| b.students.focal_split(focal))
        .fold((0, 0), |(w, n), (bw, bn)| (w + bw, n + bn));
    if w == 0 || n == 0 {
        return Err(Error::DegenerateDistrict {
            district: district.id.clone(),
            reason: format!(
                "dissimilarity needs both `{focal}` and other students (found {w} and {n})"
            ),
        });
    }
    Ok((w, n))
}

pub fn dissimilarity_parts(
    district: &District,
    schools: &[usize],
    focal: &str,
    scope: IndexScope,
) -> Result<DissimilarityParts> {
    let (focal_total, other_total) = focal_totals(district, focal)?;
    let k = district.schools().len();
    let (mut w, mut n) = (vec![0u64; k], vec![0u64; k]);
    for (block, &s) in district.blocks().iter().zip(schools) {
        let (bw, bn) = block.students.focal_split(focal);
        w[s] += bw;
        n[s] += bn;
    }
    let numerator = w
        .iter()
        .zip(&n)
        .filter(|(&ws, &ns)| scope == IndexScope::AllSchools || ws + ns > 0)
        .map(|(&ws, &ns)| school_term(ws, ns, focal_total, other_total))
        .sum();
    Ok(DissimilarityParts {
        numerator,
        focal_total,
        other_total,
    })
}

/// Two-group dissimilarity of `assignment`, focal group vs. everyone else.
pub fn dissimilarity(district: &District, assignment: &Assignment, focal: &str) -> Result<f64> {
    dissimilarity_with_scope(district, assignment, focal, IndexScope::default())
}

pub fn dissimilarity_with_scope(
    district: &District,
    assignment: &Assignment,
    focal: &str,
    scope: IndexScope,
) -> Result<f64> {
    let schools = district.assignment_indices(assignment)?;
    Ok(dissimilarity_parts(district, &schools, focal, scope)?.value())
}

pub(crate) fn switched_students(district: &District, schools: &[usize]) -> u64 {
    district
        .blocks()
        .iter()
        .zip(schools.iter().zip(district.status_quo_indices()))
        .filter(|(_, (p, q))| p != q)
        .map(|(b, _)| b.students.total())
        .sum()
}

/// Student-weighted share of students whose school changes.
pub fn percent_switched(district: &District, proposed: &Assignment) -> Result<f64> {
    let schools = district.assignment_indices(proposed)?;
    Ok(percent_switched_indices(district, &schools))
}

pub(crate) fn percent_switched_indices(district: &District, schools: &[usize]) -> f64 {
    match district.elementary_enrollment() {
        0 => 0.0,
        total => switched_students(district, schools) as f64 / total as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegregationReport {
    pub dissimilarity_status_quo: f64,
    pub dissimilarity_proposed: f64,
    /// `proposed / status_quo − 1`; 0 when the status quo is already even.
    pub relative_change: f64,
    pub percent_switched: f64,
}

pub fn segregation_report(
    district: &District,
    proposed: &Assignment,
    focal: &str,
) -> Result<SegregationReport> {
    let schools = district.assignment_indices(proposed)?;
    segregation_report_indices(district, &schools, focal)
}

pub(crate) fn segregation_report_indices(
    district: &District,
    schools: &[usize],
    focal: &str,
) -> Result<SegregationReport> {
    let before =
        dissimilarity_parts(district, district.status_quo_indices(), focal, IndexScope::default())?
            .value();
    let after = dissimilarity_parts(district, schools, focal, IndexScope::default())?.value();
    let relative_change = if before == 0.0 { 0.0 } else { after / before - 1.0 };
    Ok(SegregationReport {
        dissimilarity_status_quo: before,
        dissimilarity_proposed: after,
        relative_change,
        percent_switched: percent_switched_indices(district, schools),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TowardDistrictProportions,
    AwayFromDistrictProportions,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchoolDelta {
    pub school_id: String,
    pub school_name: String,
    pub enrollment_before: u64,
    pub enrollment_after: u64,
    /// Empty when the school has no students.
    pub proportions_before: BTreeMap<String, f64>,
    pub proportions_after: BTreeMap<String, f64>,
    pub direction_vs_district: Direction,
    /// The proposal leaves a currently enrolled school with no students.
    pub emptied: bool,
}

const DIRECTION_EPS: f64 = 1e-12;

fn l1_distance(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> f64 {
    let mut d = 0.0;
    for (g, &pv) in p {
        d += (pv - q.get(g).copied().unwrap_or(0.0)).abs();
    }
    for (g, &qv) in q {
        if !p.contains_key(g) {
            d += qv.abs();
        }
    }
    d
}

/// One entry per school, in district order.
///
/// Direction compares the L1 distance between the school's composition and
/// the district's before and after. A school that is empty on either side has
/// no composition to compare and is reported as unchanged; `emptied` flags
/// the case where the proposal closes it out.
pub fn school_deltas(district: &District, proposed: &Assignment) -> Result<Vec<SchoolDelta>> {
    let schools = district.assignment_indices(proposed)?;
    Ok(school_deltas_indices(district, &schools))
}

pub(crate) fn school_deltas_indices(district: &District, schools: &[usize]) -> Vec<SchoolDelta> {
    let k = district.schools().len();
    let mut before = vec![crate::model::DemographicVector::new(); k];
    let mut after = before.clone();
    for ((block, &q), &p) in district
        .blocks()
        .iter()
        .zip(district.status_quo_indices())
        .zip(schools)
    {
        before[q].merge(&block.students);
        after[p].merge(&block.students);
    }
    let district_props = district.totals().proportions();

    district
        .schools()
        .iter()
        .enumerate()
        .map(|(s, school)| {
            let proportions_before = before[s].proportions();
            let proportions_after = after[s].proportions();
            let direction = if proportions_before.is_empty() || proportions_after.is_empty() {
                Direction::Unchanged
            } else {
                let d0 = l1_distance(&proportions_before, &district_props);
                let d1 = l1_distance(&proportions_after, &district_props);
                if d1 < d0 - DIRECTION_EPS {
                    Direction::TowardDistrictProportions
                } else if d1 > d0 + DIRECTION_EPS {
                    Direction::AwayFromDistrictProportions
                } else {
                    Direction::Unchanged
                }
            };
            SchoolDelta {
                school_id: school.id.clone(),
                school_name: school.name.clone(),
                enrollment_before: before[s].total(),
                enrollment_after: after[s].total(),
                emptied: before[s].total() > 0 && after[s].total() == 0,
                proportions_before,
                proportions_after,
                direction_vs_district: direction,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupTravel {
    pub students: u64,
    pub mean_status_quo_minutes: f64,
    pub mean_proposed_minutes: f64,
    pub mean_delta_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelDeltaReport {
    /// Groups with at least one student.
    pub groups: BTreeMap<String, GroupTravel>,
    pub overall: GroupTravel,
}

/// Student-weighted mean travel per group, before and after.
pub fn travel_deltas(
    district: &District,
    proposed: &Assignment,
    model: &TravelModel,
) -> Result<TravelDeltaReport> {
    let schools = district.assignment_indices(proposed)?;
    let matrix = TravelMatrix::compute(district, model)?;
    Ok(travel_deltas_indices(district, &schools, &matrix))
}

pub(crate) fn travel_deltas_indices(
    district: &District,
    schools: &[usize],
    matrix: &TravelMatrix,
) -> TravelDeltaReport {
    #[derive(Default)]
    struct Acc {
        students: u64,
        before: f64,
        after: f64,
    }
    impl Acc {
        fn add(&mut self, count: u64, before: f64, after: f64) {
            self.students += count;
            self.before += count as f64 * before;
            self.after += count as f64 * after;
        }
        fn finish(&self) -> GroupTravel {
            if self.students == 0 {
                return GroupTravel {
                    students: 0,
                    mean_status_quo_minutes: 0.0,
                    mean_proposed_minutes: 0.0,
                    mean_delta_minutes: 0.0,
                };
            }
            let n = self.students as f64;
            let (b, a) = (self.before / n, self.after / n);
            GroupTravel {
                students: self.students,
                mean_status_quo_minutes: b,
                mean_proposed_minutes: a,
                mean_delta_minutes: a - b,
            }
        }
    }

    let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
    let mut overall = Acc::default();
    for (i, ((block, &q), &p)) in district
        .blocks()
        .iter()
        .zip(district.status_quo_indices())
        .zip(schools)
        .enumerate()
    {
        let (t0, t1) = (matrix.get(i, q), matrix.get(i, p));
        for (group, count) in block.students.iter() {
            if count > 0 {
                groups.entry(group.to_owned()).or_default().add(count, t0, t1);
                overall.add(count, t0, t1);
            }
        }
    }
    TravelDeltaReport {
        groups: groups.into_iter().map(|(g, a)| (g, a.finish())).collect(),
        overall: overall.finish(),
    }
}
