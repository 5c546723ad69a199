//! Batch execution of a configuration grid over many districts.

mod archive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{District, DistrictFile};
use crate::solver::{candidate_space, solve_with_incumbents, RezoningResult, SolveStatus, SolverConfig, SolverMode};

pub use archive::{load_archive, parse_archive, save_archive, ARCHIVE_SCHEMA_VERSION, TOOLKIT_VERSION};

/// Travel-feasible assignment count up to which the grid uses the exact
/// solver.
pub const DEFAULT_EXACT_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub configs: Vec<SolverConfig>,
    /// Wall-clock budget per district, split evenly across configs.
    pub budget_secs: f64,
    #[serde(default = "default_exact_limit")]
    pub exact_limit: u64,
}

fn default_exact_limit() -> u64 {
    DEFAULT_EXACT_LIMIT
}

impl Default for ScenarioGrid {
    /// τ ∈ {1.5, 2.0} × σ ∈ {1.1, 1.2}, 60 s per district.
    fn default() -> Self {
        let configs = [1.5, 2.0]
            .into_iter()
            .flat_map(|tau| [1.1, 1.2].into_iter().map(move |sigma| SolverConfig::new(tau, sigma)))
            .collect();
        Self {
            configs,
            budget_secs: 60.0,
            exact_limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

impl ScenarioGrid {
    pub fn with_budget(mut self, secs: f64) -> Self {
        self.budget_secs = secs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::Config("scenario grid needs at least one config".into()));
        }
        if !(self.budget_secs.is_finite() && self.budget_secs > 0.0) {
            return Err(Error::Config(format!("grid budget must be > 0, got {}", self.budget_secs)));
        }
        for config in &self.configs {
            config.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioOutcome {
    Solved(Box<RezoningResult>),
    Failed { error: String },
}

impl ScenarioOutcome {
    pub fn result(&self) -> Option<&RezoningResult> {
        match self {
            ScenarioOutcome::Solved(r) => Some(r),
            ScenarioOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    /// The config as requested; the result's `config_echo` holds the one used.
    pub config: SolverConfig,
    pub outcome: ScenarioOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioArchive {
    pub schema_version: String,
    pub toolkit_version: String,
    pub created_at: String,
    pub district_id: String,
    pub district: DistrictFile,
    pub results: Vec<ScenarioEntry>,
}

impl ScenarioArchive {
    pub fn district(&self) -> Result<District> {
        self.district.clone().into_district()
    }

    /// Index of the scenario to show by default: the first solved config that
    /// lowers dissimilarity, else the first solved config. The flag is true
    /// when the fallback was used.
    pub fn default_selection(&self) -> Option<(usize, bool)> {
        let solved = || {
            self.results
                .iter()
                .enumerate()
                .filter_map(|(i, e)| e.outcome.result().map(|r| (i, r)))
        };
        solved()
            .find(|(_, r)| r.objective < r.report.dissimilarity_status_quo)
            .map(|(i, _)| (i, false))
            .or_else(|| solved().next().map(|(i, _)| (i, true)))
    }

    /// Same archive with wall-clock fields cleared, for determinism checks.
    pub fn without_timing(&self) -> Self {
        let mut copy = self.clone();
        copy.created_at.clear();
        for entry in &mut copy.results {
            if let ScenarioOutcome::Solved(r) = &mut entry.outcome {
                r.solve_seconds = 0.0;
            }
        }
        copy
    }
}

/// Runs every config of `grid` on one district.
///
/// Each config gets `budget / |configs|` seconds. The exact solver is used
/// when the travel-feasible assignment space is at most `grid.exact_limit`,
/// local search otherwise. Configs are solved in order and every earlier
/// result whose caps are no looser is offered as a starting incumbent, so a
/// looser config never stores a worse objective than a tighter one. A config
/// that fails is recorded and the grid continues.
pub fn run_grid(district: &District, grid: &ScenarioGrid) -> ScenarioArchive {
    let per_config = grid.budget_secs / grid.configs.len().max(1) as f64;
    let mut results: Vec<ScenarioEntry> = Vec::with_capacity(grid.configs.len());

    for config in &grid.configs {
        let outcome = (|| {
            let mut effective = config.clone();
            effective.time_limit_secs = per_config;
            let space = candidate_space(district, config.travel_increase_cap, &config.travel_model)?;
            effective.mode = if space <= grid.exact_limit as u128 {
                SolverMode::Exact
            } else {
                SolverMode::LocalSearch
            };
            let incumbents: Vec<_> = results
                .iter()
                .filter(|prev| {
                    prev.config.travel_increase_cap <= config.travel_increase_cap
                        && prev.config.capacity_scale_cap <= config.capacity_scale_cap
                        && prev.config.travel_model == config.travel_model
                })
                .filter_map(|prev| prev.outcome.result().map(|r| r.assignment.clone()))
                .collect();
            solve_with_incumbents(district, &effective, &incumbents)
        })();
        let outcome = match outcome {
            Ok(result) => ScenarioOutcome::Solved(Box::new(result)),
            Err(e) => ScenarioOutcome::Failed { error: e.to_string() },
        };
        results.push(ScenarioEntry {
            config: config.clone(),
            outcome,
        });
    }

    ScenarioArchive {
        schema_version: ARCHIVE_SCHEMA_VERSION.to_owned(),
        toolkit_version: TOOLKIT_VERSION.to_owned(),
        created_at: chrono::Utc::now().to_rfc3339(),
        district_id: district.id.clone(),
        district: DistrictFile::from(district),
        results,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub district_id: String,
    pub config_index: usize,
    pub dissimilarity_status_quo: f64,
    pub dissimilarity_proposed: f64,
    pub relative_change: f64,
    pub percent_switched: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    /// One row per district with a solved scenario, in input order.
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<(String, String)>,
    pub median_relative_change: Option<f64>,
    pub median_percent_switched: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchEntry {
    pub district_id: String,
    pub archive: ScenarioArchive,
    /// Set when no config produced a result.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub entries: Vec<BatchEntry>,
    pub summary: BatchSummary,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

pub fn summarize(entries: &[BatchEntry]) -> BatchSummary {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for entry in entries {
        let selected = entry.archive.default_selection().and_then(|(i, _)| {
            entry.archive.results[i].outcome.result().map(|r| (i, r))
        });
        match selected {
            Some((i, r)) => rows.push(SummaryRow {
                district_id: entry.district_id.clone(),
                config_index: i,
                dissimilarity_status_quo: r.report.dissimilarity_status_quo,
                dissimilarity_proposed: r.report.dissimilarity_proposed,
                relative_change: r.report.relative_change,
                percent_switched: r.report.percent_switched,
                status: r.status,
            }),
            None => failures.push((
                entry.district_id.clone(),
                entry.error.clone().unwrap_or_else(|| "no solved scenario".into()),
            )),
        }
    }
    let mut rel: Vec<f64> = rows.iter().map(|r| r.relative_change).collect();
    let mut switched: Vec<f64> = rows.iter().map(|r| r.percent_switched).collect();
    BatchSummary {
        median_relative_change: median(&mut rel),
        median_percent_switched: median(&mut switched),
        rows,
        failures,
    }
}

/// Runs the grid over every district on `parallelism` worker threads.
/// Output order and content do not depend on the thread count.
pub fn run_batch(districts: &[District], grid: &ScenarioGrid, parallelism: usize) -> Result<BatchOutput> {
    if parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let entries: Vec<BatchEntry> = pool.install(|| {
        use rayon::prelude::*;
        districts
            .par_iter()
            .map(|district| {
                let archive = run_grid(district, grid);
                let error = if archive.results.iter().all(|e| e.outcome.result().is_none()) {
                    archive.results.iter().find_map(|e| match &e.outcome {
                        ScenarioOutcome::Failed { error } => Some(error.clone()),
                        ScenarioOutcome::Solved(_) => None,
                    })
                } else {
                    None
                };
                BatchEntry {
                    district_id: district.id.clone(),
                    archive,
                    error,
                }
            })
            .collect()
    });
    let summary = summarize(&entries);
    Ok(BatchOutput { entries, summary })
}
