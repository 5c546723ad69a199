use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Month, NaiveDate, Weekday};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::arms::CampaignArm;
use super::strata::AllocationPlan;
use super::{RaceCategory, Recipient};
use crate::error::{Error, Result};
use crate::metrics::dissimilarity;
use crate::model::{District, Urbanicity, FOCAL_GROUP};

pub const INTERCEPT: &str = "intercept";

/// Regressors with named columns and one cluster label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    columns: Vec<String>,
    x: DMatrix<f64>,
    clusters: Vec<String>,
}

impl DesignMatrix {
    pub fn new(columns: Vec<String>, rows: &[Vec<f64>], clusters: Vec<String>) -> Result<Self> {
        if rows.len() != clusters.len() {
            return Err(Error::Precondition(format!(
                "{} rows but {} cluster labels",
                rows.len(),
                clusters.len()
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Precondition(format!("duplicate design column `{dup}`")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::validation(
                    format!("design row {i}"),
                    format!("{} values for {} columns", row.len(), columns.len()),
                ));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(
                    format!("design row {i}"),
                    format!("non-finite value in `{}`", columns[j]),
                ));
            }
        }
        let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][j]);
        Ok(Self { columns, x, clusters })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    pub fn num_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.x.column(j).iter().copied().collect())
    }

    /// Numerical rank of the column-normalized cross-product matrix.
    pub fn rank(&self) -> usize {
        let k = self.num_columns();
        if k == 0 {
            return 0;
        }
        let mut scaled = self.x.clone();
        for mut col in scaled.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        let gram = scaled.transpose() * &scaled;
        let eig = gram.symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        eig.eigenvalues.iter().filter(|v| **v > max * 1e-10 && **v > 0.0).count()
    }

    pub fn ensure_full_rank(&self) -> Result<()> {
        let rank = self.rank();
        if rank < self.num_columns() || self.num_rows() < self.num_columns() {
            return Err(Error::RankDeficient {
                rank,
                columns: self.num_columns(),
            });
        }
        Ok(())
    }

    /// Drops columns that are zero in every row, returning their names.
    /// Dummies for levels absent from the data are the usual culprit.
    pub fn drop_empty_columns(&mut self) -> Vec<String> {
        let keep: Vec<usize> = (0..self.num_columns())
            .filter(|&j| self.x.column(j).iter().any(|v| *v != 0.0))
            .collect();
        let dropped = (0..self.num_columns())
            .filter(|j| !keep.contains(j))
            .map(|j| self.columns[j].clone())
            .collect();
        self.x = self.x.select_columns(&keep);
        self.columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        dropped
    }

    /// Same design with one column multiplied by `scale` and shifted by `shift`.
    pub fn with_affine_column(&self, name: &str, scale: f64, shift: f64) -> Option<Self> {
        let j = self.columns.iter().position(|c| c == name)?;
        let mut copy = self.clone();
        for v in copy.x.column_mut(j).iter_mut() {
            *v = *v * scale + shift;
        }
        Some(copy)
    }
}

/// District-level covariates shared by the recipient design and the
/// exploration-count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictCovariates {
    pub district_id: String,
    pub board_whiter: bool,
    pub dissimilarity: f64,
    pub percent_white: f64,
    pub urbanicity: Urbanicity,
    pub enrollment: u64,
    pub num_schools: usize,
}

impl DistrictCovariates {
    pub fn from_district(district: &District) -> Result<Self> {
        Ok(Self {
            district_id: district.id.clone(),
            board_whiter: district.board_whiter_than_district,
            dissimilarity: dissimilarity(district, &district.status_quo(), FOCAL_GROUP)?,
            percent_white: district.focal_share(FOCAL_GROUP),
            urbanicity: district.urbanicity,
            enrollment: district.elementary_enrollment(),
            num_schools: district.num_elementary_schools(),
        })
    }

    /// Column names in the order produced by [`DistrictCovariates::values`].
    /// Urbanicity is dummy-coded against `urban`.
    pub fn column_names(raw_enrollment: bool) -> Vec<&'static str> {
        vec![
            "board_whiter",
            "dissimilarity",
            "percent_white",
            "urbanicity_suburban",
            "urbanicity_small_city",
            "urbanicity_rural",
            if raw_enrollment { "enrollment" } else { "log_enrollment" },
            "num_schools",
        ]
    }

    pub fn values(&self, raw_enrollment: bool) -> Vec<f64> {
        let dummy = |u: Urbanicity| f64::from(u8::from(self.urbanicity == u));
        vec![
            f64::from(u8::from(self.board_whiter)),
            self.dissimilarity,
            self.percent_white,
            dummy(Urbanicity::Suburban),
            dummy(Urbanicity::SmallCity),
            dummy(Urbanicity::Rural),
            if raw_enrollment {
                self.enrollment as f64
            } else {
                (self.enrollment.max(1) as f64).ln()
            },
            self.num_schools as f64,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Opened,
    Clicked,
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opened" => Ok(Outcome::Opened),
            "clicked" => Ok(Outcome::Clicked),
            other => Err(Error::Config(format!("unknown outcome `{other}` (expected opened|clicked)"))),
        }
    }
}

/// Rows included in the click model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickDenominator {
    #[default]
    Delivered,
    Opened,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DesignOptions {
    pub raw_enrollment: bool,
    pub click_denominator: ClickDenominator,
}

/// Recipient-level regressors plus the binary response.
///
/// Columns: intercept, one dummy per non-control arm, race dummies against
/// `white`, the district covariates, weekday dummies against Monday, month
/// dummies against May. Dummies are only emitted for levels that occur in
/// the selected rows, so absent categories do not make the design singular.
/// Rows are delivered recipients, or opened ones for the click model when
/// the denominator says so. Clusters are district ids.
pub fn recipient_design(
    recipients: &[Recipient],
    plan: &AllocationPlan,
    arms: &[CampaignArm],
    covariates: &BTreeMap<String, DistrictCovariates>,
    outcome: Outcome,
    options: DesignOptions,
) -> Result<(DesignMatrix, Vec<f64>)> {
    super::arms::validate_arms(arms)?;
    let rows: Vec<&Recipient> = recipients
        .iter()
        .filter(|r| match (outcome, options.click_denominator) {
            (Outcome::Clicked, ClickDenominator::Opened) => r.opened,
            _ => r.delivered,
        })
        .collect();

    let mut row_arms = Vec::with_capacity(rows.len());
    for r in &rows {
        r.validate()?;
        let arm = plan.arm_of(&r.district_id).ok_or_else(|| {
            Error::validation(format!("recipient {}", r.id), format!("district {} not in plan", r.district_id))
        })?;
        if !arms.iter().any(|a| a.id == arm) {
            return Err(Error::validation(format!("recipient {}", r.id), format!("unknown arm {arm}")));
        }
        if !covariates.contains_key(&r.district_id) {
            return Err(Error::validation(
                format!("recipient {}", r.id),
                format!("no covariates for district {}", r.district_id),
            ));
        }
        row_arms.push(arm);
    }

    let arm_levels: Vec<&CampaignArm> = arms
        .iter()
        .filter(|a| !a.control && row_arms.contains(&a.id.as_str()))
        .collect();
    let race_levels: Vec<RaceCategory> = RaceCategory::ALL
        .into_iter()
        .filter(|c| *c != RaceCategory::White && rows.iter().any(|r| r.race == *c))
        .collect();
    let weekdays: Vec<Weekday> = [
        Weekday::Tue,
        Weekday::Wed,
        Weekday::Thu,
        Weekday::Fri,
        Weekday::Sat,
        Weekday::Sun,
    ]
    .into_iter()
    .filter(|d| rows.iter().any(|r| r.sent_on.weekday() == *d))
    .collect();
    let months: Vec<u32> = (1..=12)
        .filter(|&m| m != 5 && rows.iter().any(|r| r.sent_on.month() == m))
        .collect();

    let mut columns = vec![INTERCEPT.to_owned()];
    columns.extend(arm_levels.iter().map(|a| format!("arm_{}", a.id)));
    columns.extend(race_levels.iter().map(|c| format!("race_{}", c.as_str())));
    columns.extend(DistrictCovariates::column_names(options.raw_enrollment).iter().map(|s| s.to_string()));
    columns.extend(weekdays.iter().map(|d| format!("dow_{}", weekday_name(*d))));
    columns.extend(months.iter().map(|&m| format!("month_{}", month_name(m))));

    let mut data = Vec::with_capacity(rows.len());
    let mut clusters = Vec::with_capacity(rows.len());
    let mut response = Vec::with_capacity(rows.len());
    let indicator = |b: bool| f64::from(u8::from(b));
    for (r, arm) in rows.iter().zip(&row_arms) {
        let mut row = vec![1.0];
        row.extend(arm_levels.iter().map(|a| indicator(a.id == *arm)));
        row.extend(race_levels.iter().map(|c| indicator(r.race == *c)));
        row.extend(covariates[&r.district_id].values(options.raw_enrollment));
        row.extend(weekdays.iter().map(|d| indicator(r.sent_on.weekday() == *d)));
        row.extend(months.iter().map(|&m| indicator(r.sent_on.month() == m)));
        data.push(row);
        clusters.push(r.district_id.clone());
        response.push(indicator(match outcome {
            Outcome::Opened => r.opened,
            Outcome::Clicked => r.clicked,
        }));
    }
    Ok((DesignMatrix::new(columns, &data, clusters)?, response))
}

fn weekday_name(d: Weekday) -> &'static str {
    match d {
        Weekday::Mon => "monday",
        Weekday::Tue => "tuesday",
        Weekday::Wed => "wednesday",
        Weekday::Thu => "thursday",
        Weekday::Fri => "friday",
        Weekday::Sat => "saturday",
        Weekday::Sun => "sunday",
    }
}

fn month_name(m: u32) -> String {
    Month::try_from(m as u8)
        .map(|m| m.name().to_lowercase())
        .unwrap_or_else(|_| m.to_string())
}

/// Default send date used by generated recipients: a Monday in May.
pub fn default_send_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 5, 1).expect("valid date")
}
