//! District domain types shared by every other module.
//!
//! A [`District`] is immutable once built: construction validates every
//! cross-reference and derives the status-quo enrollment of each school, so
//! downstream code can index blocks and schools by position without
//! re-checking.

mod file;
mod synth;
mod travel;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{load_district, parse_district, save_district, DistrictFile};
pub use synth::{synthesize_district, SynthesisSpec};
pub use travel::{travel_minutes, TravelMatrix, TravelMode, TravelModel, EARTH_RADIUS_KM};

/// Group label of the focal group in the White/non-White objective.
pub const FOCAL_GROUP: &str = "white";

/// Per-group student counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemographicVector(BTreeMap<String, u64>);

impl DemographicVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut v = Self::new();
        for (group, count) in counts {
            v.add(group, count);
        }
        v
    }

    pub fn add(&mut self, group: impl Into<String>, count: u64) {
        *self.0.entry(group.into()).or_insert(0) += count;
    }

    pub fn merge(&mut self, other: &DemographicVector) {
        for (group, &count) in &other.0 {
            self.add(group.clone(), count);
        }
    }

    pub fn get(&self, group: &str) -> u64 {
        self.0.get(group).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    /// Splits the counts into (focal group, everyone else).
    pub fn focal_split(&self, focal: &str) -> (u64, u64) {
        let focal_count = self.get(focal);
        (focal_count, self.total() - focal_count)
    }

    pub fn groups(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(g, &c)| (g.as_str(), c))
    }

    /// Each group's share of the total; empty when the total is zero.
    pub fn proportions(&self) -> BTreeMap<String, f64> {
        let total = self.total();
        if total == 0 {
            return BTreeMap::new();
        }
        self.0
            .iter()
            .map(|(g, &c)| (g.clone(), c as f64 / total as f64))
            .collect()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Self(self.0.iter().map(|(g, &c)| (g.clone(), c * factor)).collect())
    }
}

/// A point in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lat.is_finite() && (-90.0..=90.0).contains(&self.lat)) {
            return Err(Error::Domain(format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if !(self.lon.is_finite() && (-180.0..=180.0).contains(&self.lon)) {
            return Err(Error::Domain(format!("longitude {} outside [-180, 180]", self.lon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Urbanicity {
    Urban,
    Suburban,
    SmallCity,
    Rural,
}

impl Urbanicity {
    pub const ALL: [Urbanicity; 4] = [
        Urbanicity::Urban,
        Urbanicity::Suburban,
        Urbanicity::SmallCity,
        Urbanicity::Rural,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Urbanicity::Urban => "urban",
            Urbanicity::Suburban => "suburban",
            Urbanicity::SmallCity => "small_city",
            Urbanicity::Rural => "rural",
        }
    }
}

impl fmt::Display for Urbanicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Urbanicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Urbanicity::ALL
            .into_iter()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown urbanicity `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub centroid: LatLon,
    pub students: DemographicVector,
    pub status_quo_school: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct School {
    pub id: String,
    pub name: String,
    pub location: LatLon,
    /// Students in blocks zoned to this school today. Derived at construction.
    pub status_quo_enrollment: u64,
}

/// District-level descriptors that are not derived from blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictMeta {
    pub id: String,
    pub name: String,
    pub urbanicity: Urbanicity,
    pub board_whiter_than_district: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct District {
    pub id: String,
    pub name: String,
    pub urbanicity: Urbanicity,
    pub board_whiter_than_district: bool,
    blocks: Vec<Block>,
    schools: Vec<School>,
    school_index: HashMap<String, usize>,
    block_index: HashMap<String, usize>,
    status_quo: Vec<usize>,
}

impl District {
    /// Validates cross references and derives enrollments.
    ///
    /// `schools` may carry any `status_quo_enrollment`; it is recomputed.
    pub fn new(meta: DistrictMeta, schools: Vec<School>, blocks: Vec<Block>) -> Result<Self> {
        let mut school_index = HashMap::with_capacity(schools.len());
        for (i, school) in schools.iter().enumerate() {
            school
                .location
                .validate()
                .map_err(|e| Error::validation(format!("school {}", school.id), e.to_string()))?;
            if school_index.insert(school.id.clone(), i).is_some() {
                return Err(Error::validation(
                    format!("school {}", school.id),
                    "duplicate school id",
                ));
            }
        }

        let mut block_index = HashMap::with_capacity(blocks.len());
        let mut status_quo = Vec::with_capacity(blocks.len());
        for (i, block) in blocks.iter().enumerate() {
            block
                .centroid
                .validate()
                .map_err(|e| Error::validation(format!("block {}", block.id), e.to_string()))?;
            if block_index.insert(block.id.clone(), i).is_some() {
                return Err(Error::validation(
                    format!("block {}", block.id),
                    "duplicate block id",
                ));
            }
            let school = school_index.get(&block.status_quo_school).ok_or_else(|| {
                Error::validation(
                    format!("block {}", block.id),
                    format!("references unknown school `{}`", block.status_quo_school),
                )
            })?;
            status_quo.push(*school);
        }

        let mut schools = schools;
        for school in &mut schools {
            school.status_quo_enrollment = 0;
        }
        for (block, &s) in blocks.iter().zip(&status_quo) {
            schools[s].status_quo_enrollment += block.students.total();
        }

        Ok(Self {
            id: meta.id,
            name: meta.name,
            urbanicity: meta.urbanicity,
            board_whiter_than_district: meta.board_whiter_than_district,
            blocks,
            schools,
            school_index,
            block_index,
            status_quo,
        })
    }

    pub fn meta(&self) -> DistrictMeta {
        DistrictMeta {
            id: self.id.clone(),
            name: self.name.clone(),
            urbanicity: self.urbanicity,
            board_whiter_than_district: self.board_whiter_than_district,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn schools(&self) -> &[School] {
        &self.schools
    }

    pub fn num_elementary_schools(&self) -> usize {
        self.schools.len()
    }

    pub fn elementary_enrollment(&self) -> u64 {
        self.blocks.iter().map(|b| b.students.total()).sum()
    }

    pub fn school_position(&self, id: &str) -> Option<usize> {
        self.school_index.get(id).copied()
    }

    pub fn block_position(&self, id: &str) -> Option<usize> {
        self.block_index.get(id).copied()
    }

    /// Status-quo school index of each block, in block order.
    pub fn status_quo_indices(&self) -> &[usize] {
        &self.status_quo
    }

    pub fn status_quo(&self) -> Assignment {
        self.assignment_from_indices(&self.status_quo)
    }

    /// District-wide counts per group.
    pub fn totals(&self) -> DemographicVector {
        let mut totals = DemographicVector::new();
        for block in &self.blocks {
            totals.merge(&block.students);
        }
        totals
    }

    /// Share of students in the focal group, 0 for an empty district.
    pub fn focal_share(&self, focal: &str) -> f64 {
        let totals = self.totals();
        match totals.total() {
            0 => 0.0,
            t => totals.get(focal) as f64 / t as f64,
        }
    }

    pub fn assignment_from_indices(&self, schools: &[usize]) -> Assignment {
        debug_assert_eq!(schools.len(), self.blocks.len());
        Assignment(
            self.blocks
                .iter()
                .zip(schools)
                .map(|(b, &s)| (b.id.clone(), self.schools[s].id.clone()))
                .collect(),
        )
    }

    /// Resolves an assignment to school indices in block order, checking that
    /// it is total and references only known schools.
    pub fn assignment_indices(&self, assignment: &Assignment) -> Result<Vec<usize>> {
        if let Some(extra) = assignment.0.keys().find(|b| !self.block_index.contains_key(*b)) {
            return Err(Error::validation(
                format!("block {extra}"),
                "assignment names a block outside the district",
            ));
        }
        self.blocks
            .iter()
            .map(|block| {
                let school = assignment.school_of(&block.id).ok_or_else(|| {
                    Error::validation(format!("block {}", block.id), "block is unassigned")
                })?;
                self.school_position(school).ok_or_else(|| {
                    Error::validation(
                        format!("block {}", block.id),
                        format!("assigned to unknown school `{school}`"),
                    )
                })
            })
            .collect()
    }

    /// Every distinct group label present in any block, sorted.
    pub fn group_labels(&self) -> Vec<String> {
        let set: HashSet<&str> = self.blocks.iter().flat_map(|b| b.students.groups()).collect();
        let mut labels: Vec<String> = set.into_iter().map(str::to_owned).collect();
        labels.sort();
        labels
    }
}

/// Block id → school id, total over a district's blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<String, String>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, block: impl Into<String>, school: impl Into<String>) {
        self.0.insert(block.into(), school.into());
    }

    pub fn school_of(&self, block: &str) -> Option<&str> {
        self.0.get(block).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(b, s)| (b.as_str(), s.as_str()))
    }
}

impl<B: Into<String>, S: Into<String>> FromIterator<(B, S)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (B, S)>>(iter: T) -> Self {
        Self(iter.into_iter().map(|(b, s)| (b.into(), s.into())).collect())
    }
}
