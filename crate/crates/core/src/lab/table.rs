//! Comma-separated input and output tables with a header row.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::arms::CampaignArm;
use super::design::{DesignMatrix, DistrictCovariates, INTERCEPT};
use super::strata::AllocationPlan;
use super::Recipient;
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let at = e
        .position()
        .map(|p| format!("line {}: ", p.line()))
        .unwrap_or_default();
    Error::parse(source, format!("{at}{e}"))
}

pub fn read_records<T: DeserializeOwned>(reader: impl Read, source: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(source, e)))
        .collect()
}

pub fn write_records<T: Serialize>(writer: impl Write, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r).map_err(|e| csv_error("output", e))?;
    }
    w.flush().map_err(|e| Error::io("output", e))
}

fn read_path<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    read_records(open(path)?, &path.display().to_string())
}

pub fn read_recipients(path: impl AsRef<Path>) -> Result<Vec<Recipient>> {
    let rows: Vec<Recipient> = read_path(path)?;
    for r in &rows {
        r.validate()?;
    }
    Ok(rows)
}

pub fn read_arms(path: impl AsRef<Path>) -> Result<Vec<CampaignArm>> {
    let arms = read_path(path)?;
    super::arms::validate_arms(&arms)?;
    Ok(arms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictValue {
    pub district_id: String,
    pub dissimilarity: f64,
}

/// Reads `district_id` and `dissimilarity`; other columns are ignored.
pub fn read_district_values(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let rows: Vec<DistrictValue> = read_path(path)?;
    Ok(rows.into_iter().map(|r| (r.district_id, r.dissimilarity)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub district_id: String,
    pub stratum: u8,
    pub arm_id: String,
}

pub fn allocation_rows(plan: &AllocationPlan) -> Vec<AllocationRow> {
    plan.assignments
        .iter()
        .map(|(d, a)| AllocationRow {
            district_id: d.clone(),
            stratum: plan.strata.get(d).copied().unwrap_or(0),
            arm_id: a.clone(),
        })
        .collect()
}

/// Columns of the per-district exploration table: id, count, then the
/// district covariates.
pub fn exploration_columns(raw_enrollment: bool) -> Vec<&'static str> {
    let mut cols = vec!["district_id", "explorations"];
    cols.extend(DistrictCovariates::column_names(raw_enrollment));
    cols
}

pub fn write_exploration_table(
    writer: impl Write,
    rows: &[(DistrictCovariates, u64)],
    raw_enrollment: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fail = |e: csv::Error| csv_error("output", e);
    w.write_record(exploration_columns(raw_enrollment)).map_err(fail)?;
    for (cov, count) in rows {
        let mut record = vec![cov.district_id.clone(), count.to_string()];
        record.extend(cov.values(raw_enrollment).iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("output", e))
}

/// Which columns of a numeric table play which role.
#[derive(Debug, Clone, Default)]
pub struct TableSpec<'a> {
    pub response: &'a str,
    /// Cluster label column; rows are their own clusters when absent.
    pub cluster: Option<&'a str>,
    /// Label or alternate-outcome columns left out of the design.
    pub exclude: &'a [&'a str],
}

/// Builds a design from a numeric table. Every column that is not the
/// response, the cluster or excluded becomes a regressor; an intercept is
/// prepended unless the table has one.
pub fn read_design_table(reader: impl Read, source: &str, spec: &TableSpec) -> Result<(DesignMatrix, Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(source, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(source, format!("missing column `{name}`")))
    };
    let response_col = find(spec.response)?;
    let cluster_col = spec.cluster.map(find).transpose()?;
    let regressors: Vec<usize> = (0..headers.len())
        .filter(|&j| j != response_col && Some(j) != cluster_col && !spec.exclude.contains(&headers[j].as_str()))
        .collect();
    let has_intercept = regressors.iter().any(|&j| headers[j] == INTERCEPT);

    let mut columns: Vec<String> = Vec::new();
    if !has_intercept {
        columns.push(INTERCEPT.into());
    }
    columns.extend(regressors.iter().map(|&j| headers[j].clone()));

    let mut rows = Vec::new();
    let mut clusters = Vec::new();
    let mut y = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let number = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("").trim();
            match raw {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => raw.parse::<f64>().map_err(|_| {
                    Error::parse(source, format!("row {}: column `{}` is not numeric: {raw:?}", i + 1, headers[j]))
                }),
            }
        };
        let mut row = Vec::with_capacity(columns.len());
        if !has_intercept {
            row.push(1.0);
        }
        for &j in &regressors {
            row.push(number(j)?);
        }
        rows.push(row);
        y.push(number(response_col)?);
        clusters.push(match cluster_col {
            Some(c) => record.get(c).unwrap_or("").to_owned(),
            None => format!("row{i}"),
        });
    }
    Ok((DesignMatrix::new(columns, &rows, clusters)?, y))
}

pub fn read_design_file(path: impl AsRef<Path>, spec: &TableSpec) -> Result<(DesignMatrix, Vec<f64>)> {
    let path = path.as_ref();
    read_design_table(open(path)?, &path.display().to_string(), spec)
}
