//! Transit access time: straight-line walking minutes from each hex cell
//! center to its nearest rail station, averaged per area over the cells
//! tagged to it.
//!
//! Distances are great-circle rather than routed; a caller-side detour
//! multiplier (fold it into the speed) approximates street-network
//! inflation.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{haversine_ft, GeoPoint, HexGrid, StudyRegion};

/// 3.0 mph in feet per minute.
pub const DEFAULT_WALKING_SPEED_FTPM: f64 = 264.2;

#[derive(Debug, Clone)]
pub struct StationSet {
    stations: Vec<(String, GeoPoint)>,
}

impl StationSet {
    pub fn new(stations: Vec<(String, GeoPoint)>) -> StationSet {
        StationSet { stations }
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn stations(&self) -> &[(String, GeoPoint)] {
        &self.stations
    }
}

/// Stations CSV with a `name,lon,lat` header, any column order, `#` comment
/// lines allowed.
pub fn read_stations_csv<R: Read>(input: R) -> Result<StationSet> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("stations file is missing a `{name}` column")))
    };
    let (name_col, lon_col, lat_col) = (col("name")?, col("lon")?, col("lat")?);

    let mut stations = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx as u64 + 2;
        let record = record?;
        let field = |c: usize| -> Result<f64> {
            record[c].trim().parse::<f64>().map_err(|_| Error::CsvRow {
                row,
                message: format!("`{}` is not a number", &record[c]),
            })
        };
        let point = GeoPoint::new(field(lon_col)?, field(lat_col)?)?;
        stations.push((record[name_col].to_string(), point));
    }
    Ok(StationSet::new(stations))
}

/// Minutes from every cell center to the closest station.
pub fn hex_access_time(
    grid: &HexGrid,
    stations: &StationSet,
    walking_speed_ftpm: f64,
) -> Result<Vec<f64>> {
    if stations.is_empty() {
        return Err(Error::EmptyStations);
    }
    if !(walking_speed_ftpm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "walking speed must be positive, got {walking_speed_ftpm}"
        )));
    }
    Ok(grid
        .cells
        .iter()
        .map(|cell| {
            stations
                .stations()
                .iter()
                .map(|&(_, s)| haversine_ft(cell.center, s))
                .fold(f64::INFINITY, f64::min)
                / walking_speed_ftpm
        })
        .collect())
}

/// Unweighted mean over each area's tagged cells, in region order. Every
/// area must own at least one cell; shrink the hex edge otherwise.
pub fn area_average_tat(
    region: &StudyRegion,
    grid: &HexGrid,
    cell_minutes: &[f64],
) -> Result<Vec<f64>> {
    if cell_minutes.len() != grid.cells.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.cells.len(),
            got: cell_minutes.len(),
        });
    }
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (cell, &minutes) in grid.cells.iter().zip(cell_minutes) {
        if let Some(id) = &cell.area_id {
            let entry = acc.entry(id).or_insert((0.0, 0));
            entry.0 += minutes;
            entry.1 += 1;
        }
    }
    region
        .areas
        .iter()
        .map(|area| match acc.get(area.id.as_str()) {
            Some(&(sum, count)) => Ok(sum / count as f64),
            None => Err(Error::AreaWithoutCells(area.id.clone())),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TatResult {
    pub walking_speed_ftpm: f64,
    /// Aligned with the grid's cell order.
    pub cell_minutes: Vec<f64>,
    /// Aligned with region area order.
    pub area_ids: Vec<String>,
    pub area_minutes: Vec<f64>,
}

pub fn transit_access_time(
    region: &StudyRegion,
    grid: &HexGrid,
    stations: &StationSet,
    walking_speed_ftpm: f64,
) -> Result<TatResult> {
    let cell_minutes = hex_access_time(grid, stations, walking_speed_ftpm)?;
    let area_minutes = area_average_tat(region, grid, &cell_minutes)?;
    Ok(TatResult {
        walking_speed_ftpm,
        cell_minutes,
        area_ids: region.ids(),
        area_minutes,
    })
}
