use serde::{Deserialize, Serialize};

use super::{District, LatLon};
use crate::error::{Error, Result};

/// Mean earth radius (IUGG), kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMode {
    #[default]
    StraightLineConstantSpeed,
}

/// Travel-time model between block centroids and schools.
///
/// The only mode today is great-circle distance at a constant speed. Callers
/// that have real road-network times should build a [`TravelMatrix`]
/// directly with [`TravelMatrix::from_fn`]; the solvers only see the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelModel {
    pub mode: TravelMode,
    pub speed_km_per_min: f64,
    /// Lower bound on travel between two distinct points, minutes.
    pub min_travel_floor_min: f64,
}

impl Default for TravelModel {
    fn default() -> Self {
        Self {
            mode: TravelMode::StraightLineConstantSpeed,
            speed_km_per_min: 0.5,
            min_travel_floor_min: 2.0,
        }
    }
}

impl TravelModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_km_per_min.is_finite() && self.speed_km_per_min > 0.0) {
            return Err(Error::Domain(format!(
                "travel speed must be positive, got {}",
                self.speed_km_per_min
            )));
        }
        if !(self.min_travel_floor_min.is_finite() && self.min_travel_floor_min > 0.0) {
            return Err(Error::Domain(format!(
                "travel floor must be positive, got {}",
                self.min_travel_floor_min
            )));
        }
        Ok(())
    }

    /// Unfloored minutes.
    pub fn raw_minutes(&self, a: LatLon, b: LatLon) -> Result<f64> {
        a.validate()?;
        b.validate()?;
        match self.mode {
            TravelMode::StraightLineConstantSpeed => {
                Ok(great_circle_km(a, b) / self.speed_km_per_min)
            }
        }
    }

    pub fn minutes(&self, a: LatLon, b: LatLon) -> Result<f64> {
        let raw = self.raw_minutes(a, b)?;
        if a == b {
            Ok(0.0)
        } else {
            Ok(raw.max(self.min_travel_floor_min))
        }
    }
}

/// Floored travel minutes between two points.
pub fn travel_minutes(a: LatLon, b: LatLon, model: &TravelModel) -> Result<f64> {
    model.minutes(a, b)
}

fn great_circle_km(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Block × school travel minutes, row-major by block.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelMatrix {
    num_schools: usize,
    minutes: Vec<f64>,
    floor: f64,
}

impl TravelMatrix {
    pub fn compute(district: &District, model: &TravelModel) -> Result<Self> {
        model.validate()?;
        let schools = district.schools();
        let mut minutes = Vec::with_capacity(district.blocks().len() * schools.len());
        for block in district.blocks() {
            for school in schools {
                minutes.push(model.minutes(block.centroid, school.location)?);
            }
        }
        Ok(Self {
            num_schools: schools.len(),
            minutes,
            floor: model.min_travel_floor_min,
        })
    }

    /// Builds a matrix from any travel-time source, e.g. precomputed road times.
    pub fn from_fn(
        num_blocks: usize,
        num_schools: usize,
        floor: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut minutes = Vec::with_capacity(num_blocks * num_schools);
        for b in 0..num_blocks {
            for s in 0..num_schools {
                minutes.push(f(b, s));
            }
        }
        Self {
            num_schools,
            minutes,
            floor,
        }
    }

    #[inline]
    pub fn get(&self, block: usize, school: usize) -> f64 {
        self.minutes[block * self.num_schools + school]
    }

    /// Additive grace applied by the travel-increase cap.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn num_blocks(&self) -> usize {
        self.minutes.len().checked_div(self.num_schools).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent oracle: spherical law of cosines in f64.
    fn cosine_law_km(a: LatLon, b: LatLon) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
        EARTH_RADIUS_KM * c.acos()
    }

    #[test]
    fn same_point_is_zero() {
        let m = TravelModel::default();
        let p = LatLon::new(12.5, -3.25);
        assert_eq!(travel_minutes(p, p, &m).unwrap(), 0.0);
    }

    #[test]
    fn one_degree_of_longitude_at_equator() {
        let m = TravelModel::default();
        let t = travel_minutes(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0), &m).unwrap();
        // 2πR/360 = 111.19508 km at 0.5 km/min
        let expected = 2.0 * std::f64::consts::PI * EARTH_RADIUS_KM / 360.0 / 0.5;
        assert!((t - expected).abs() < 1e-9, "{t} vs {expected}");
        assert!((t - 222.4).abs() < 0.05);
    }

    #[test]
    fn near_pair_above_floor_is_not_floored() {
        let m = TravelModel::default();
        let (a, b) = (LatLon::new(10.0, 20.0), LatLon::new(10.01, 20.01));
        let t = travel_minutes(a, b, &m).unwrap();
        assert!((t - cosine_law_km(a, b) / 0.5).abs() < 1e-6);
        assert!(t > 3.0 && t < 3.2, "{t}");
    }

    #[test]
    fn sub_floor_pair_is_floored() {
        let m = TravelModel::default();
        let (a, b) = (LatLon::new(10.0, 20.0), LatLon::new(10.001, 20.001));
        assert!(m.raw_minutes(a, b).unwrap() < 0.5);
        assert_eq!(travel_minutes(a, b, &m).unwrap(), 2.0);
    }

    #[test]
    fn bad_coordinates_are_domain_errors() {
        let m = TravelModel::default();
        let ok = LatLon::new(0.0, 0.0);
        assert!(matches!(
            travel_minutes(ok, LatLon::new(0.0, 181.0), &m),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            travel_minutes(LatLon::new(f64::NAN, 0.0), ok, &m),
            Err(Error::Domain(_))
        ));
    }

    fn coord() -> impl Strategy<Value = LatLon> {
        (-89.0f64..89.0, -179.0f64..179.0).prop_map(|(lat, lon)| LatLon::new(lat, lon))
    }

    proptest! {
        #[test]
        fn symmetric(a in coord(), b in coord()) {
            let m = TravelModel::default();
            prop_assert_eq!(m.minutes(a, b).unwrap(), m.minutes(b, a).unwrap());
        }

        #[test]
        fn raw_triangle_inequality(a in coord(), b in coord(), c in coord()) {
            let m = TravelModel::default();
            let ab = m.raw_minutes(a, b).unwrap();
            let bc = m.raw_minutes(b, c).unwrap();
            let ac = m.raw_minutes(a, c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn floored_distinct_points_respect_floor(a in coord(), b in coord()) {
            prop_assume!(a != b);
            let m = TravelModel::default();
            prop_assert!(m.minutes(a, b).unwrap() >= m.min_travel_floor_min);
        }
    }
}
