//! Flat-top hexagonal tessellation over a region's bounding box.

use super::{GeoPoint, Projection, StudyRegion};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HexCell {
    pub center: GeoPoint,
    /// Id of the containing area, when the center lies inside one.
    pub area_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HexGrid {
    pub edge_ft: f64,
    pub cells: Vec<HexCell>,
}

impl HexGrid {
    pub fn tagged_count(&self) -> usize {
        self.cells.iter().filter(|c| c.area_id.is_some()).count()
    }
}

const MAX_CELLS: usize = 20_000_000;

/// Tessellate the region's bounding box with flat-top hexagons of the given
/// edge length. The lattice is anchored at the projected bounding-box min
/// corner; every pair of adjacent centers is `edge_ft * sqrt(3)` apart. Cell
/// centers are tagged with their containing area (or left untagged outside
/// all areas).
pub fn hex_tessellate(region: &StudyRegion, edge_ft: f64) -> Result<HexGrid> {
    if !(edge_ft > 0.0) {
        return Err(Error::InvalidInput(format!(
            "hex edge must be positive, got {edge_ft}"
        )));
    }
    let proj = Projection::azimuthal_equidistant(region.centroid());

    let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
    let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for area in &region.areas {
        for ring in &area.rings {
            for &p in &ring.points {
                let (x, y) = proj.forward(p);
                xmin = xmin.min(x);
                ymin = ymin.min(y);
                xmax = xmax.max(x);
                ymax = ymax.max(y);
            }
        }
    }
    if !(xmax > xmin || ymax > ymin) {
        return Err(Error::DegenerateRegion);
    }

    // flat-top lattice: columns 1.5a apart, rows sqrt(3)a apart, odd columns
    // shifted half a row; all six neighbors of a center sit sqrt(3)a away
    let a = edge_ft;
    let col_step = 1.5 * a;
    let row_step = 3f64.sqrt() * a;
    let half_row = row_step / 2.0;

    let cols = ((xmax + a - xmin) / col_step).floor() as usize + 1;
    let rows = ((ymax + half_row - ymin) / row_step).floor() as usize + 2;
    if cols.saturating_mul(rows) > MAX_CELLS {
        return Err(Error::InvalidInput(format!(
            "hex edge {edge_ft} ft yields more than {MAX_CELLS} cells for this region"
        )));
    }

    let mut cells = Vec::new();
    for col in 0..cols {
        let x = xmin + col as f64 * col_step;
        if x - a > xmax {
            break;
        }
        let offset = if col % 2 == 1 { half_row } else { 0.0 };
        for row in 0..rows {
            let y = ymin + offset + row as f64 * row_step;
            if y - half_row > ymax {
                break;
            }
            let center = proj.inverse(x, y);
            let area_id = region.locate(center).map(str::to_owned);
            cells.push(HexCell { center, area_id });
        }
    }

    Ok(HexGrid { edge_ft, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{haversine_ft, load_region, AreaUnit, Ring, EARTH_RADIUS_FT};

    fn mile_square_region() -> StudyRegion {
        let dlat = 5280.0 / (EARTH_RADIUS_FT * std::f64::consts::PI / 180.0);
        let dlon = dlat / 41.85f64.to_radians().cos();
        let (lon0, lat0) = (-87.7, 41.85);
        StudyRegion {
            areas: vec![AreaUnit {
                id: "1".into(),
                name: "SQ".into(),
                rings: vec![Ring {
                    points: vec![
                        GeoPoint { lon: lon0, lat: lat0 },
                        GeoPoint { lon: lon0 + dlon, lat: lat0 },
                        GeoPoint { lon: lon0 + dlon, lat: lat0 + dlat },
                        GeoPoint { lon: lon0, lat: lat0 + dlat },
                        GeoPoint { lon: lon0, lat: lat0 },
                    ],
                    hole: false,
                }],
                area_sq_mi: 1.0,
            }],
        }
    }

    #[test]
    fn square_mile_tag_count_matches_hex_area() {
        // hex area at 1750 ft edge is ~0.285 sq mi, so a square mile holds
        // 3.5 cells up to boundary effects
        let grid = hex_tessellate(&mile_square_region(), 1750.0).unwrap();
        let tagged = grid.tagged_count();
        assert!((3..=5).contains(&tagged), "tagged {tagged}");
    }

    #[test]
    fn tiny_region_still_gets_a_cell() {
        let dlat = 100.0 / (EARTH_RADIUS_FT * std::f64::consts::PI / 180.0);
        let region = StudyRegion {
            areas: vec![AreaUnit {
                id: "1".into(),
                name: "T".into(),
                rings: vec![Ring {
                    points: vec![
                        GeoPoint { lon: -87.7, lat: 41.85 },
                        GeoPoint { lon: -87.7 + dlat, lat: 41.85 },
                        GeoPoint { lon: -87.7 + dlat, lat: 41.85 + dlat },
                        GeoPoint { lon: -87.7, lat: 41.85 + dlat },
                        GeoPoint { lon: -87.7, lat: 41.85 },
                    ],
                    hole: false,
                }],
                area_sq_mi: 0.001,
            }],
        };
        let grid = hex_tessellate(&region, 1750.0).unwrap();
        assert!(!grid.cells.is_empty());
    }

    #[test]
    fn adjacent_centers_are_sqrt3_edges_apart() {
        let grid = hex_tessellate(&mile_square_region(), 1750.0).unwrap();
        let expected = 1750.0 * 3f64.sqrt();
        // nearest-neighbor distance across all cells is the lattice spacing
        let mut checked = 0;
        for (i, c) in grid.cells.iter().enumerate() {
            let mut nearest = f64::INFINITY;
            for (j, d) in grid.cells.iter().enumerate() {
                if i != j {
                    nearest = nearest.min(haversine_ft(c.center, d.center));
                }
            }
            if nearest.is_finite() {
                assert!(
                    (nearest - expected).abs() / expected < 0.001,
                    "nearest {nearest} vs {expected}"
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn tags_agree_with_locate(){
        let region = mile_square_region();
        let grid = hex_tessellate(&region, 1750.0).unwrap();
        for cell in &grid.cells {
            assert_eq!(
                region.locate(cell.center).map(str::to_owned),
                cell.area_id
            );
        }
    }

    #[test]
    fn degenerate_region_rejected() {
        // a "polygon" collapsed to a point
        let p = GeoPoint { lon: -87.7, lat: 41.85 };
        let region = StudyRegion {
            areas: vec![AreaUnit {
                id: "1".into(),
                name: "P".into(),
                rings: vec![Ring { points: vec![p, p, p, p], hole: false }],
                area_sq_mi: 1.0,
            }],
        };
        assert!(matches!(
            hex_tessellate(&region, 1750.0),
            Err(Error::DegenerateRegion)
        ));
    }

    #[test]
    fn chicago_style_geojson_loads_and_tessellates() {
        // two-area strip exercises the loader + tessellation together
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
        let gj = format!(
            r#"{{"type":"FeatureCollection","features":[{},{}]}}"#,
            feature("1", -87.7),
            feature("2", -87.7 + dlon)
        );
        let region = load_region(gj.as_bytes()).unwrap();
        let grid = hex_tessellate(&region, 1750.0).unwrap();
        let tagged1 = grid.cells.iter().filter(|c| c.area_id.as_deref() == Some("1")).count();
        let tagged2 = grid.cells.iter().filter(|c| c.area_id.as_deref() == Some("2")).count();
        assert!(tagged1 >= 3 && tagged2 >= 3);
        assert!(grid.cells.iter().any(|c| c.area_id.is_none()));
    }
}
