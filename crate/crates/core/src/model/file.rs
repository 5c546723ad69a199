//! JSON district file: `district`, `schools`, `blocks`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Block, DemographicVector, District, DistrictMeta, LatLon, School};
use crate::error::{Error, Result};

/// On-disk shape of a district. Counts are signed so that negative values
/// reach validation instead of failing as an opaque type error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictFile {
    pub district: DistrictMeta,
    pub schools: Vec<SchoolRecord>,
    pub blocks: Vec<BlockRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchoolRecord {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub school: String,
    pub counts: BTreeMap<String, i64>,
}

impl DistrictFile {
    pub fn into_district(self) -> Result<District> {
        let schools = self
            .schools
            .into_iter()
            .map(|s| School {
                id: s.id,
                name: s.name,
                location: LatLon::new(s.lat, s.lon),
                status_quo_enrollment: 0,
            })
            .collect();
        let blocks = self
            .blocks
            .into_iter()
            .map(|b| {
                let mut students = DemographicVector::new();
                for (group, count) in b.counts {
                    let count = u64::try_from(count).map_err(|_| {
                        Error::validation(
                            format!("block {}", b.id),
                            format!("negative count {count} for group `{group}`"),
                        )
                    })?;
                    students.add(group, count);
                }
                Ok(Block {
                    id: b.id,
                    centroid: LatLon::new(b.lat, b.lon),
                    students,
                    status_quo_school: b.school,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        District::new(self.district, schools, blocks)
    }
}

impl From<&District> for DistrictFile {
    fn from(d: &District) -> Self {
        DistrictFile {
            district: d.meta(),
            schools: d
                .schools()
                .iter()
                .map(|s| SchoolRecord {
                    id: s.id.clone(),
                    name: s.name.clone(),
                    lat: s.location.lat,
                    lon: s.location.lon,
                })
                .collect(),
            blocks: d
                .blocks()
                .iter()
                .map(|b| BlockRecord {
                    id: b.id.clone(),
                    lat: b.centroid.lat,
                    lon: b.centroid.lon,
                    school: b.status_quo_school.clone(),
                    counts: b.students.iter().map(|(g, c)| (g.to_owned(), c as i64)).collect(),
                })
                .collect(),
        }
    }
}

/// Parses a district document. `source_name` only labels errors.
pub fn parse_district(text: &str, source_name: &str) -> Result<District> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: DistrictFile = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::parse(source_name, format!("at `{}`: {}", e.path(), e.inner())))?;
    file.into_district()
}

pub fn load_district(path: impl AsRef<Path>) -> Result<District> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_district(&text, &path.display().to_string())
}

pub fn save_district(district: &District, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&DistrictFile::from(district))
        .expect("district file serialization is infallible");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "district": {"id": "d1", "name": "Mini", "urbanicity": "suburban", "board_whiter_than_district": true},
      "schools": [
        {"id": "s1", "name": "North", "lat": 40.0, "lon": -75.0},
        {"id": "s2", "name": "South", "lat": 39.9, "lon": -75.0}
      ],
      "blocks": [
        {"id": "b1", "lat": 40.01, "lon": -75.0, "school": "s1", "counts": {"white": 12, "black": 3}},
        {"id": "b2", "lat": 39.91, "lon": -75.0, "school": "s2", "counts": {"white": 2, "hispanic": 9}}
      ]
    }"#;

    #[test]
    fn minimal_file_loads() {
        let d = parse_district(MINIMAL, "mini").unwrap();
        assert_eq!(d.elementary_enrollment(), 12 + 3 + 2 + 9);
        assert_eq!(d.schools()[0].status_quo_enrollment, 15);
        assert_eq!(d.schools()[1].status_quo_enrollment, 11);
        assert!(d.board_whiter_than_district);
    }

    #[test]
    fn unknown_school_reference_is_validation_error() {
        let text = MINIMAL.replace(r#""school": "s2""#, r#""school": "s9""#);
        match parse_district(&text, "mini") {
            Err(Error::Validation { record, message }) => {
                assert_eq!(record, "block b2");
                assert!(message.contains("s9"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn negative_count_is_validation_error() {
        let text = MINIMAL.replace(r#""white": 2"#, r#""white": -2"#);
        match parse_district(&text, "mini") {
            Err(Error::Validation { record, .. }) => assert_eq!(record, "block b2"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_file_is_parse_error_with_path() {
        let text = MINIMAL.replace(r#""lat": 40.01"#, r#""lat": "north""#);
        match parse_district(&text, "mini") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("blocks[0].lat"), "{message}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let d = parse_district(MINIMAL, "mini").unwrap();
        let text = serde_json::to_string(&DistrictFile::from(&d)).unwrap();
        assert_eq!(parse_district(&text, "again").unwrap(), d);
    }
}
