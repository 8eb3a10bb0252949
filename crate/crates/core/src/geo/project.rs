//! Local map projections on a spherical Earth.
//!
//! Two azimuthal projections centered on a reference point, both in feet:
//! equidistant for adjacency and grid geometry (distances from the center are
//! exact), equal-area for polygon areas. Adequate at city scale, where the
//! distortion of either is far below the tolerances used downstream.

use super::{GeoPoint, EARTH_RADIUS_FT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    AzimuthalEquidistant,
    LambertEqualArea,
}

/// Forward/inverse projection centered on a fixed point.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    kind: ProjectionKind,
    lon0: f64,
    sin_lat0: f64,
    cos_lat0: f64,
}

impl Projection {
    pub fn azimuthal_equidistant(center: GeoPoint) -> Projection {
        Projection::new(ProjectionKind::AzimuthalEquidistant, center)
    }

    pub fn lambert_equal_area(center: GeoPoint) -> Projection {
        Projection::new(ProjectionKind::LambertEqualArea, center)
    }

    fn new(kind: ProjectionKind, center: GeoPoint) -> Projection {
        let lat0 = center.lat.to_radians();
        Projection {
            kind,
            lon0: center.lon.to_radians(),
            sin_lat0: lat0.sin(),
            cos_lat0: lat0.cos(),
        }
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    /// Project to planar (x, y) in feet.
    pub fn forward(&self, p: GeoPoint) -> (f64, f64) {
        let lat = p.lat.to_radians();
        let dlon = p.lon.to_radians() - self.lon0;
        let (sin_lat, cos_lat) = (lat.sin(), lat.cos());
        let cos_c = (self.sin_lat0 * sin_lat + self.cos_lat0 * cos_lat * dlon.cos()).clamp(-1.0, 1.0);
        let k = match self.kind {
            ProjectionKind::AzimuthalEquidistant => {
                let c = cos_c.acos();
                // sinc-style limit: k -> 1 as c -> 0
                if c.abs() < 1e-12 {
                    1.0
                } else {
                    c / c.sin()
                }
            }
            ProjectionKind::LambertEqualArea => (2.0 / (1.0 + cos_c).max(1e-15)).sqrt(),
        };
        let x = EARTH_RADIUS_FT * k * cos_lat * dlon.sin();
        let y = EARTH_RADIUS_FT * k * (self.cos_lat0 * sin_lat - self.sin_lat0 * cos_lat * dlon.cos());
        (x, y)
    }

    /// Inverse projection back to lon/lat degrees.
    pub fn inverse(&self, x: f64, y: f64) -> GeoPoint {
        let rho = x.hypot(y);
        if rho < 1e-9 {
            return GeoPoint {
                lon: self.lon0.to_degrees(),
                lat: self.sin_lat0.asin().to_degrees(),
            };
        }
        let c = match self.kind {
            ProjectionKind::AzimuthalEquidistant => rho / EARTH_RADIUS_FT,
            ProjectionKind::LambertEqualArea => {
                2.0 * ((rho / (2.0 * EARTH_RADIUS_FT)).clamp(-1.0, 1.0)).asin()
            }
        };
        let (sin_c, cos_c) = (c.sin(), c.cos());
        let lat = (cos_c * self.sin_lat0 + y * sin_c * self.cos_lat0 / rho)
            .clamp(-1.0, 1.0)
            .asin();
        let lon = self.lon0
            + (x * sin_c).atan2(rho * self.cos_lat0 * cos_c - y * self.sin_lat0 * sin_c);
        GeoPoint {
            lon: lon.to_degrees(),
            lat: lat.to_degrees(),
        }
    }
}

/// Planar signed area of a closed ring in the units of its coordinates.
pub fn shoelace_area(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let (x1, y1) = points[i];
        let (x2, y2) = points[(i + 1) % n];
        acc += x1 * y2 - x2 * y1;
    }
    acc * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const CHICAGO: GeoPoint = GeoPoint {
        lon: -87.7,
        lat: 41.85,
    };

    #[test]
    fn forward_inverse_round_trip() {
        for proj in [
            Projection::azimuthal_equidistant(CHICAGO),
            Projection::lambert_equal_area(CHICAGO),
        ] {
            let p = GeoPoint {
                lon: -87.62,
                lat: 41.91,
            };
            let (x, y) = proj.forward(p);
            let q = proj.inverse(x, y);
            assert_relative_eq!(q.lon, p.lon, epsilon = 1e-9);
            assert_relative_eq!(q.lat, p.lat, epsilon = 1e-9);
        }
    }

    #[test]
    fn equidistant_preserves_distance_from_center() {
        let proj = Projection::azimuthal_equidistant(CHICAGO);
        let p = GeoPoint {
            lon: -87.55,
            lat: 41.95,
        };
        let (x, y) = proj.forward(p);
        let planar = x.hypot(y);
        let geodesic = super::super::haversine_ft(CHICAGO, p);
        assert_relative_eq!(planar, geodesic, max_relative = 1e-9);
    }

    #[test]
    fn equal_area_square_mile() {
        // A lon/lat quadrilateral sized to one square mile at this latitude.
        let proj = Projection::lambert_equal_area(CHICAGO);
        let dlat = 5280.0 / (EARTH_RADIUS_FT * std::f64::consts::PI / 180.0);
        let dlon = dlat / CHICAGO.lat.to_radians().cos();
        let ring = [
            (CHICAGO.lon, CHICAGO.lat),
            (CHICAGO.lon + dlon, CHICAGO.lat),
            (CHICAGO.lon + dlon, CHICAGO.lat + dlat),
            (CHICAGO.lon, CHICAGO.lat + dlat),
        ];
        let planar: Vec<(f64, f64)> = ring
            .iter()
            .map(|&(lon, lat)| proj.forward(GeoPoint { lon, lat }))
            .collect();
        let sq_mi = shoelace_area(&planar).abs() / (5280.0 * 5280.0);
        assert_relative_eq!(sq_mi, 1.0, max_relative = 0.005);
    }
}
