//! GeoJSON (RFC 7946) FeatureCollection loading.

use serde_json::Value;

use super::{shoelace_area, AreaUnit, GeoPoint, Projection, Ring, StudyRegion, SQ_FT_PER_SQ_MI};
use crate::error::{Error, Result};

/// Property names used when reading features.
#[derive(Debug, Clone)]
pub struct RegionOptions {
    /// Property holding the area id. When absent on a feature, `"id"` is
    /// tried before failing.
    pub id_property: String,
    /// Property holding the display name; falls back to `"name"`, then to
    /// the id.
    pub name_property: String,
    /// When a feature carries this property its value overrides the area
    /// computed from the geometry.
    pub area_property: String,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            // matches the Chicago data-portal community-area export
            id_property: "area_numbe".into(),
            name_property: "community".into(),
            area_property: "area_sq_mi".into(),
        }
    }
}

pub fn load_region(geojson: &[u8]) -> Result<StudyRegion> {
    load_region_with(geojson, &RegionOptions::default())
}

/// Parse a FeatureCollection of Polygon/MultiPolygon features into a
/// [`StudyRegion`]. Areas are ordered by id (numerically when every id is an
/// integer, lexicographically otherwise) and that order is final.
pub fn load_region_with(geojson: &[u8], opts: &RegionOptions) -> Result<StudyRegion> {
    let root: Value =
        serde_json::from_slice(geojson).map_err(|e| Error::GeoJson(format!("malformed JSON: {e}")))?;
    if root["type"].as_str() != Some("FeatureCollection") {
        return Err(Error::GeoJson("expected a FeatureCollection".into()));
    }
    let features = root["features"]
        .as_array()
        .ok_or_else(|| Error::GeoJson("missing features array".into()))?;

    let mut areas = Vec::with_capacity(features.len());
    for (fi, feature) in features.iter().enumerate() {
        let props = &feature["properties"];
        let id = property_string(props, &opts.id_property)
            .or_else(|| property_string(props, "id"))
            .ok_or_else(|| {
                Error::GeoJson(format!(
                    "feature {fi}: missing id property `{}`",
                    opts.id_property
                ))
            })?;
        let name = property_string(props, &opts.name_property)
            .or_else(|| property_string(props, "name"))
            .unwrap_or_else(|| id.clone());

        let geometry = &feature["geometry"];
        let rings = match geometry["type"].as_str() {
            Some("Polygon") => polygon_rings(&geometry["coordinates"], &id)?,
            Some("MultiPolygon") => {
                let polys = geometry["coordinates"]
                    .as_array()
                    .ok_or_else(|| Error::GeoJson(format!("area `{id}`: bad MultiPolygon")))?;
                let mut all = Vec::new();
                for poly in polys {
                    all.extend(polygon_rings(poly, &id)?);
                }
                all
            }
            other => {
                return Err(Error::GeoJson(format!(
                    "area `{id}`: unsupported geometry type {other:?}"
                )))
            }
        };
        if rings.is_empty() {
            return Err(Error::GeoJson(format!("area `{id}`: no rings")));
        }

        let area_sq_mi = match props.get(&opts.area_property).and_then(Value::as_f64) {
            Some(v) => v,
            None => geometry_area_sq_mi(&rings),
        };
        if !(area_sq_mi > 0.0) {
            return Err(Error::GeoJson(format!(
                "area `{id}`: non-positive area {area_sq_mi}"
            )));
        }

        areas.push(AreaUnit {
            id,
            name,
            rings,
            area_sq_mi,
        });
    }

    if areas.is_empty() {
        return Err(Error::GeoJson("no features".into()));
    }

    let numeric = areas.iter().all(|a| a.id.parse::<u64>().is_ok());
    if numeric {
        areas.sort_by_key(|a| a.id.parse::<u64>().unwrap());
    } else {
        areas.sort_by(|a, b| a.id.cmp(&b.id));
    }
    for pair in areas.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(Error::DuplicateAreaId(pair[0].id.clone()));
        }
    }

    Ok(StudyRegion { areas })
}

fn property_string(props: &Value, key: &str) -> Option<String> {
    match props.get(key)? {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(i.to_string())
            } else {
                Some(n.to_string())
            }
        }
        _ => None,
    }
}

fn polygon_rings(coords: &Value, id: &str) -> Result<Vec<Ring>> {
    let rings = coords
        .as_array()
        .ok_or_else(|| Error::GeoJson(format!("area `{id}`: bad Polygon coordinates")))?;
    let mut out = Vec::with_capacity(rings.len());
    for (ri, ring) in rings.iter().enumerate() {
        let raw = ring
            .as_array()
            .ok_or_else(|| Error::GeoJson(format!("area `{id}`: ring {ri} is not an array")))?;
        if raw.len() < 4 {
            return Err(Error::DegenerateRing(id.to_string()));
        }
        let mut points = Vec::with_capacity(raw.len());
        for pos in raw {
            let pair = pos
                .as_array()
                .filter(|p| p.len() >= 2)
                .ok_or_else(|| Error::GeoJson(format!("area `{id}`: bad position in ring {ri}")))?;
            let lon = pair[0]
                .as_f64()
                .ok_or_else(|| Error::GeoJson(format!("area `{id}`: non-numeric lon")))?;
            let lat = pair[1]
                .as_f64()
                .ok_or_else(|| Error::GeoJson(format!("area `{id}`: non-numeric lat")))?;
            points.push(GeoPoint::new(lon, lat)?);
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if first != last {
            return Err(Error::UnclosedRing(id.to_string()));
        }
        out.push(Ring {
            points,
            hole: ri > 0,
        });
    }
    Ok(out)
}

/// Area from geometry via an equal-area projection centered on the polygon's
/// own vertex mean: exterior rings add, holes subtract.
fn geometry_area_sq_mi(rings: &[Ring]) -> f64 {
    let mut n = 0usize;
    let (mut lon, mut lat) = (0.0, 0.0);
    for ring in rings {
        for p in &ring.points[..ring.points.len() - 1] {
            lon += p.lon;
            lat += p.lat;
            n += 1;
        }
    }
    let center = GeoPoint {
        lon: lon / n as f64,
        lat: lat / n as f64,
    };
    let proj = Projection::lambert_equal_area(center);
    let mut sq_ft = 0.0;
    for ring in rings {
        let planar: Vec<(f64, f64)> = ring.points[..ring.points.len() - 1]
            .iter()
            .map(|&p| proj.forward(p))
            .collect();
        let a = shoelace_area(&planar).abs();
        sq_ft += if ring.hole { -a } else { a };
    }
    sq_ft / SQ_FT_PER_SQ_MI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::EARTH_RADIUS_FT;
    use approx::assert_relative_eq;

    pub(crate) fn square_feature(id: &str, lon0: f64, lat0: f64, dlon: f64, dlat: f64) -> String {
        format!(
            r#"{{"type":"Feature","properties":{{"area_numbe":"{id}","community":"AREA {id}"}},
               "geometry":{{"type":"Polygon","coordinates":[[[{a},{b}],[{c},{b}],[{c},{d}],[{a},{d}],[{a},{b}]]]}}}}"#,
            a = lon0,
            b = lat0,
            c = lon0 + dlon,
            d = lat0 + dlat,
        )
    }

    pub(crate) fn collection(features: &[String]) -> Vec<u8> {
        format!(
            r#"{{"type":"FeatureCollection","features":[{}]}}"#,
            features.join(",")
        )
        .into_bytes()
    }

    /// One square mile in degrees at the given latitude.
    pub(crate) fn mile_steps(lat: f64) -> (f64, f64) {
        let dlat = 5280.0 / (EARTH_RADIUS_FT * std::f64::consts::PI / 180.0);
        (dlat / lat.to_radians().cos(), dlat)
    }

    #[test]
    fn unit_square_mile_area() {
        let (dlon, dlat) = mile_steps(41.85);
        let gj = collection(&[square_feature("1", -87.7, 41.85, dlon, dlat)]);
        let region = load_region(&gj).unwrap();
        assert_eq!(region.len(), 1);
        assert_relative_eq!(region.areas[0].area_sq_mi, 1.0, max_relative = 0.005);
    }

    #[test]
    fn duplicate_id_rejected() {
        let (dlon, dlat) = mile_steps(41.85);
        let gj = collection(&[
            square_feature("1", -87.7, 41.85, dlon, dlat),
            square_feature("1", -87.6, 41.85, dlon, dlat),
        ]);
        match load_region(&gj) {
            Err(Error::DuplicateAreaId(id)) => assert_eq!(id, "1"),
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn unclosed_ring_rejected() {
        let gj = br#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"area_numbe":"1","community":"X"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}}]}"#;
        assert!(matches!(load_region(gj), Err(Error::UnclosedRing(_))));
    }

    #[test]
    fn id_fallback_and_numeric_ordering() {
        let (dlon, dlat) = mile_steps(41.85);
        let mut f2 = square_feature("2", -87.6, 41.85, dlon, dlat);
        f2 = f2.replace("area_numbe", "id");
        let f10 = square_feature("10", -87.7, 41.85, dlon, dlat);
        let gj = collection(&[f10, f2]);
        let region = load_region(&gj).unwrap();
        assert_eq!(region.ids(), vec!["2".to_string(), "10".to_string()]);
    }

    #[test]
    fn area_property_wins_over_geometry() {
        let (dlon, dlat) = mile_steps(41.85);
        let f = square_feature("1", -87.7, 41.85, dlon, dlat).replace(
            r#""community":"AREA 1""#,
            r#""community":"AREA 1","area_sq_mi":2.5"#,
        );
        let region = load_region(&collection(&[f])).unwrap();
        assert_eq!(region.areas[0].area_sq_mi, 2.5);
    }

    #[test]
    fn monte_carlo_area_agreement() {
        // L-shaped polygon: geometry area vs point-sampling estimate
        let (dlon, dlat) = mile_steps(41.85);
        let gj = format!(
            r#"{{"type":"FeatureCollection","features":[{{"type":"Feature",
              "properties":{{"area_numbe":"1","community":"L"}},
              "geometry":{{"type":"Polygon","coordinates":[[
                [-87.7,41.85],[{x2},41.85],[{x2},{y1}],[{x1},{y1}],[{x1},{y2}],[-87.7,{y2}],[-87.7,41.85]
              ]]}}}}]}}"#,
            x1 = -87.7 + dlon,
            x2 = -87.7 + 2.0 * dlon,
            y1 = 41.85 + dlat,
            y2 = 41.85 + 2.0 * dlat,
        );
        let region = load_region(gj.as_bytes()).unwrap();
        let area = &region.areas[0];

        use rand::Rng;
        let mut rng = crate::rng::stream(5, 0);
        let total = 200_000;
        let mut hits = 0u32;
        for _ in 0..total {
            let p = GeoPoint {
                lon: rng.gen_range(-87.7..-87.7 + 2.0 * dlon),
                lat: rng.gen_range(41.85..41.85 + 2.0 * dlat),
            };
            if area.contains(p) {
                hits += 1;
            }
        }
        // sampling box is 4 sq mi; polygon covers 3 of them
        let mc = 4.0 * hits as f64 / total as f64;
        assert_relative_eq!(area.area_sq_mi, mc, max_relative = 0.01);
    }
}
