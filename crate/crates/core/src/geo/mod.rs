//! Geographic substrate: areal units, geodesic distance, point location,
//! contiguity and hexagonal tessellation.

mod adjacency;
mod geojson;
mod hex;
mod project;

pub use adjacency::{contiguity_adjacency, queen_adjacency, rook_adjacency, Adjacency, Contiguity};
pub use geojson::{load_region, load_region_with, RegionOptions};
pub use hex::{hex_tessellate, HexCell, HexGrid};
pub use project::{shoelace_area, Projection, ProjectionKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earth radius in feet; every geodesic quantity in the crate uses feet.
pub const EARTH_RADIUS_FT: f64 = 20_902_231.0;

pub const SQ_FT_PER_SQ_MI: f64 = 5280.0 * 5280.0;

/// Tolerance in degrees for treating a point as lying on a polygon boundary
/// (about 0.4 millifeet at mid latitudes).
const BOUNDARY_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<GeoPoint> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) || lon.is_nan() || lat.is_nan() {
            return Err(Error::InvalidCoordinate { lon, lat });
        }
        Ok(GeoPoint { lon, lat })
    }
}

/// Great-circle distance in feet.
pub fn haversine_ft(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_FT * s.sqrt().clamp(-1.0, 1.0).asin()
}

/// One closed lon/lat ring of an area boundary.
#[derive(Debug, Clone)]
pub struct Ring {
    pub points: Vec<GeoPoint>,
    /// True when the ring cuts a hole out of the area.
    pub hole: bool,
}

#[derive(Debug, Clone)]
pub struct AreaUnit {
    pub id: String,
    pub name: String,
    pub rings: Vec<Ring>,
    pub area_sq_mi: f64,
}

impl AreaUnit {
    /// Even-odd containment with boundary points counted as inside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let pts = &ring.points;
            // skip the closing duplicate so each edge is visited once
            let m = pts.len() - 1;
            for i in 0..m {
                let a = pts[i];
                let b = pts[i + 1];
                if point_on_segment(p, a, b) {
                    return true;
                }
                if (a.lat > p.lat) != (b.lat > p.lat) {
                    let t = (p.lat - a.lat) / (b.lat - a.lat);
                    let x = a.lon + t * (b.lon - a.lon);
                    if p.lon < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

fn point_on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let (abx, aby) = (b.lon - a.lon, b.lat - a.lat);
    let (apx, apy) = (p.lon - a.lon, p.lat - a.lat);
    let len2 = abx * abx + aby * aby;
    if len2 == 0.0 {
        return apx.hypot(apy) <= BOUNDARY_EPS_DEG;
    }
    let t = ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0);
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    dx.hypot(dy) <= BOUNDARY_EPS_DEG
}

/// The spatial frame: an ordered list of areal units. The ordering is fixed
/// at load time and indexes every downstream vector and matrix.
#[derive(Debug, Clone)]
pub struct StudyRegion {
    pub areas: Vec<AreaUnit>,
}

impl StudyRegion {
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.areas.iter().position(|a| a.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.areas.iter().map(|a| a.id.clone()).collect()
    }

    /// Mean of all exterior-ring vertices; the center for local projections.
    pub fn centroid(&self) -> GeoPoint {
        let mut n = 0usize;
        let (mut lon, mut lat) = (0.0, 0.0);
        for area in &self.areas {
            for ring in area.rings.iter().filter(|r| !r.hole) {
                for p in &ring.points[..ring.points.len() - 1] {
                    lon += p.lon;
                    lat += p.lat;
                    n += 1;
                }
            }
        }
        GeoPoint {
            lon: lon / n as f64,
            lat: lat / n as f64,
        }
    }

    /// Lon/lat bounding box over all vertices: (min, max).
    pub fn bbox(&self) -> (GeoPoint, GeoPoint) {
        let (mut lon_min, mut lat_min) = (f64::INFINITY, f64::INFINITY);
        let (mut lon_max, mut lat_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for area in &self.areas {
            for ring in &area.rings {
                for p in &ring.points {
                    lon_min = lon_min.min(p.lon);
                    lat_min = lat_min.min(p.lat);
                    lon_max = lon_max.max(p.lon);
                    lat_max = lat_max.max(p.lat);
                }
            }
        }
        (
            GeoPoint { lon: lon_min, lat: lat_min },
            GeoPoint { lon: lon_max, lat: lat_max },
        )
    }

    /// Id of the area containing `p`, if any. Boundary points resolve to the
    /// lowest-indexed containing area.
    pub fn locate(&self, p: GeoPoint) -> Option<&str> {
        self.areas
            .iter()
            .find(|a| a.contains(p))
            .map(|a| a.id.as_str())
    }
}

/// GeoJSON text for two adjacent one-square-mile areas with ids "1" and
/// "2"; shared across module test suites.
#[cfg(test)]
pub(crate) fn test_two_square_region() -> String {
    let dlat = 5280.0 / (EARTH_RADIUS_FT * std::f64::consts::PI / 180.0);
    let dlon = dlat / 41.85f64.to_radians().cos();
    let feature = |id: &str, lon0: f64| {
        format!(
            r#"{{"type":"Feature","properties":{{"area_numbe":"{id}","community":"A{id}"}},"geometry":{{"type":"Polygon","coordinates":[[[{a},{b}],[{c},{b}],[{c},{d}],[{a},{d}],[{a},{b}]]]}}}}"#,
            a = lon0,
            b = 41.85,
            c = lon0 + dlon,
            d = 41.85 + dlat,
        )
    };
    format!(
        r#"{{"type":"FeatureCollection","features":[{},{}]}}"#,
        feature("1", -87.7),
        feature("2", -87.7 + dlon)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    pub(crate) fn square_ring(lon0: f64, lat0: f64, dlon: f64, dlat: f64) -> Ring {
        Ring {
            points: vec![
                GeoPoint { lon: lon0, lat: lat0 },
                GeoPoint { lon: lon0 + dlon, lat: lat0 },
                GeoPoint { lon: lon0 + dlon, lat: lat0 + dlat },
                GeoPoint { lon: lon0, lat: lat0 + dlat },
                GeoPoint { lon: lon0, lat: lat0 },
            ],
            hole: false,
        }
    }

    fn unit_area(id: &str, lon0: f64, lat0: f64) -> AreaUnit {
        AreaUnit {
            id: id.into(),
            name: id.into(),
            rings: vec![square_ring(lon0, lat0, 0.01, 0.01)],
            area_sq_mi: 1.0,
        }
    }

    #[test]
    fn haversine_zero_and_symmetry() {
        let a = GeoPoint { lon: -87.7, lat: 41.85 };
        let b = GeoPoint { lon: -87.61, lat: 41.92 };
        assert_eq!(haversine_ft(a, a), 0.0);
        assert_eq!(haversine_ft(a, b), haversine_ft(b, a));
    }

    #[test]
    fn haversine_one_degree_latitude() {
        let a = GeoPoint { lon: -87.7, lat: 41.0 };
        let b = GeoPoint { lon: -87.7, lat: 42.0 };
        let d = haversine_ft(a, b);
        assert_relative_eq!(d, 364_566.0, max_relative = 0.005);
    }

    #[test]
    fn haversine_triangle_inequality() {
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..200 {
            let mut pt = || GeoPoint {
                lon: rng.gen_range(-88.0..-87.0),
                lat: rng.gen_range(41.0..42.5),
            };
            let (a, b, c) = (pt(), pt(), pt());
            let (ab, bc, ac) = (haversine_ft(a, b), haversine_ft(b, c), haversine_ft(a, c));
            assert!(ac <= ab + bc + (ab + bc) * 1e-6);
        }
    }

    #[test]
    fn locate_interior_outside_and_tie_break() {
        let region = StudyRegion {
            // areas share the vertical edge at lon -87.69
            areas: vec![unit_area("5", -87.7, 41.85), unit_area("7", -87.69, 41.85)],
        };
        let inside5 = GeoPoint { lon: -87.695, lat: 41.855 };
        let inside7 = GeoPoint { lon: -87.685, lat: 41.855 };
        let outside = GeoPoint { lon: -87.5, lat: 41.0 };
        let shared = GeoPoint { lon: -87.69, lat: 41.855 };
        assert_eq!(region.locate(inside5), Some("5"));
        assert_eq!(region.locate(inside7), Some("7"));
        assert_eq!(region.locate(outside), None);
        assert_eq!(region.locate(shared), Some("5"));
    }

    #[test]
    fn contains_respects_holes() {
        let mut area = unit_area("1", -87.7, 41.85);
        let mut hole = square_ring(-87.697, 41.853, 0.004, 0.004);
        hole.hole = true;
        area.rings.push(hole);
        assert!(!area.contains(GeoPoint { lon: -87.695, lat: 41.855 }));
        assert!(area.contains(GeoPoint { lon: -87.6991, lat: 41.8501 }));
    }

    #[test]
    fn geopoint_validation() {
        assert!(GeoPoint::new(-87.7, 41.85).is_ok());
        assert!(GeoPoint::new(-187.7, 41.85).is_err());
        assert!(GeoPoint::new(-87.7, 91.0).is_err());
    }
}
