use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rezone_core::metrics::dissimilarity;
use rezone_core::model::{District, FOCAL_GROUP};
use rezone_core::scenario::{load_archive, ScenarioArchive};
use serde::{Deserialize, Serialize};

pub struct IndexedDistrict {
    pub district: District,
    pub archive: ScenarioArchive,
    pub source: PathBuf,
    /// Taken from the archive when any config solved, recomputed otherwise.
    pub dissimilarity_status_quo: Option<f64>,
}

/// Immutable view of every archive in a directory, keyed by district id.
#[derive(Default)]
pub struct ArchiveIndex {
    districts: BTreeMap<String, IndexedDistrict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictListing {
    pub id: String,
    pub name: String,
    pub urbanicity: String,
    pub dissimilarity_status_quo: Option<f64>,
}

impl ArchiveIndex {
    /// Loads every `*.json` archive under `dir`. Unreadable files are logged
    /// and skipped. When two archives cover one district the newer
    /// `created_at` wins.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut index = Self::default();
        for path in paths {
            match load_archive(&path) {
                Ok(archive) => {
                    if let Err(e) = index.insert(archive, path.clone()) {
                        tracing::warn!(path = %path.display(), error = %e, "skipping archive");
                    }
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping archive"),
            }
        }
        Ok(index)
    }

    pub fn insert(&mut self, archive: ScenarioArchive, source: PathBuf) -> rezone_core::Result<()> {
        let district = archive.district()?;
        if let Some(existing) = self.districts.get(&district.id) {
            if existing.archive.created_at >= archive.created_at {
                return Ok(());
            }
        }
        let stored = archive
            .results
            .iter()
            .find_map(|e| e.outcome.result())
            .map(|r| r.report.dissimilarity_status_quo);
        let dissimilarity_status_quo =
            stored.or_else(|| dissimilarity(&district, &district.status_quo(), FOCAL_GROUP).ok());
        self.districts.insert(
            district.id.clone(),
            IndexedDistrict {
                district,
                archive,
                source,
                dissimilarity_status_quo,
            },
        );
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&IndexedDistrict> {
        self.districts.get(id)
    }

    pub fn len(&self) -> usize {
        self.districts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.districts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &IndexedDistrict> {
        self.districts.values()
    }

    /// Sorted by name, then id.
    pub fn listings(&self) -> Vec<DistrictListing> {
        let mut out: Vec<DistrictListing> = self
            .iter()
            .map(|d| DistrictListing {
                id: d.district.id.clone(),
                name: d.district.name.clone(),
                urbanicity: d.district.urbanicity.to_string(),
                dissimilarity_status_quo: d.dissimilarity_status_quo,
            })
            .collect();
        out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
        out
    }
}
