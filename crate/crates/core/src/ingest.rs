//! Trip-record cleaning, per-area demand aggregation and design-matrix
//! assembly.
//!
//! Cleaning and aggregation are single-pass and bounded-memory so that
//! hundred-million-row extracts stream through without materialization.
//! Covariate unit scaling happens here, not in the estimator, so model
//! coefficients come out in the documented units. Recognized raw columns:
//!
//! * `pop_density_sq_mi` (persons per sq mi) is scaled by 1e-5 and renamed
//!   `pop_density_per_100k_sq_mi`;
//! * `bars_restaurants_sq_mi` (count per sq mi) is scaled by 1e-3 and renamed
//!   `bar_restaurant_density_per_1k_sq_mi`.
//!
//! Everything else passes through under its own name.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::StudyRegion;

/// Header names of the raw trip CSV. Defaults match the Chicago Data Portal
/// TNC-trips export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub start: String,
    pub seconds: String,
    pub miles: String,
    pub pickup_area: String,
    pub dropoff_area: String,
    pub fare: String,
    pub shared_authorized: String,
    pub trips_pooled: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            start: "Trip Start Timestamp".into(),
            seconds: "Trip Seconds".into(),
            miles: "Trip Miles".into(),
            pickup_area: "Pickup Community Area".into(),
            dropoff_area: "Dropoff Community Area".into(),
            fare: "Fare".into(),
            shared_authorized: "Shared Trip Authorized".into(),
            trips_pooled: "Trips Pooled".into(),
        }
    }
}

/// One cleaned trip. `trips_pooled` counts the parties matched into the
/// vehicle trip; it is forced to 1 whenever sharing was not authorized.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub start: NaiveDateTime,
    pub duration_s: u64,
    pub miles: f64,
    pub pickup_area: Option<String>,
    pub dropoff_area: Option<String>,
    pub fare_usd: f64,
    pub shared_authorized: bool,
    pub trips_pooled: u32,
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct RejectionStats {
    pub kept: u64,
    pub missing_origin: u64,
    pub missing_destination: u64,
    pub fare_zero: u64,
    pub fare_excessive: u64,
    pub zero_duration: u64,
    pub zero_miles: u64,
    pub unparseable: u64,
}

impl RejectionStats {
    pub fn rejected(&self) -> u64 {
        self.missing_origin
            + self.missing_destination
            + self.fare_zero
            + self.fare_excessive
            + self.zero_duration
            + self.zero_miles
            + self.unparseable
    }

    pub fn total(&self) -> u64 {
        self.kept + self.rejected()
    }
}

enum Reject {
    MissingOrigin,
    MissingDestination,
    FareZero,
    FareExcessive,
    ZeroDuration,
    ZeroMiles,
    Unparseable(String),
}

const TIMESTAMP_FORMATS: [&str; 3] = [
    "%m/%d/%Y %I:%M:%S %p",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
];

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

/// Portal numerics show up with currency signs and thousands separators.
fn numeric(raw: &str) -> String {
    raw.trim().trim_start_matches('$').replace(',', "")
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "t" | "1" | "y" | "yes" => Some(true),
        "false" | "f" | "0" | "n" | "no" => Some(false),
        _ => None,
    }
}

fn optional_area(raw: &str) -> Option<String> {
    let t = raw.trim();
    if t.is_empty() {
        None
    } else {
        Some(t.to_owned())
    }
}

struct ColumnIndices {
    start: usize,
    seconds: usize,
    miles: usize,
    pickup: usize,
    dropoff: usize,
    fare: usize,
    shared: usize,
    pooled: usize,
}

impl ColumnIndices {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<ColumnIndices> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Csv(format!("trip csv missing column `{name}`")))
        };
        Ok(ColumnIndices {
            start: find(&map.start)?,
            seconds: find(&map.seconds)?,
            miles: find(&map.miles)?,
            pickup: find(&map.pickup_area)?,
            dropoff: find(&map.dropoff_area)?,
            fare: find(&map.fare)?,
            shared: find(&map.shared_authorized)?,
            pooled: find(&map.trips_pooled)?,
        })
    }
}

fn parse_row(record: &csv::StringRecord, idx: &ColumnIndices) -> std::result::Result<TripRecord, Reject> {
    let field = |i: usize| record.get(i).unwrap_or("");

    let start = parse_timestamp(field(idx.start))
        .ok_or_else(|| Reject::Unparseable(format!("bad timestamp `{}`", field(idx.start))))?;
    let duration_s: u64 = numeric(field(idx.seconds))
        .parse()
        .map_err(|_| Reject::Unparseable(format!("bad seconds `{}`", field(idx.seconds))))?;
    let miles: f64 = numeric(field(idx.miles))
        .parse()
        .map_err(|_| Reject::Unparseable(format!("bad miles `{}`", field(idx.miles))))?;
    if !miles.is_finite() || miles < 0.0 {
        return Err(Reject::Unparseable(format!("bad miles `{}`", field(idx.miles))));
    }
    let fare: f64 = numeric(field(idx.fare))
        .parse()
        .map_err(|_| Reject::Unparseable(format!("bad fare `{}`", field(idx.fare))))?;
    if !fare.is_finite() {
        return Err(Reject::Unparseable(format!("bad fare `{}`", field(idx.fare))));
    }
    let shared_authorized = parse_bool(field(idx.shared))
        .ok_or_else(|| Reject::Unparseable(format!("bad boolean `{}`", field(idx.shared))))?;
    let pooled_raw = field(idx.pooled).trim();
    let trips_pooled = if pooled_raw.is_empty() {
        1
    } else {
        let v: u32 = numeric(pooled_raw)
            .parse()
            .map_err(|_| Reject::Unparseable(format!("bad trips-pooled `{pooled_raw}`")))?;
        if shared_authorized && v == 0 {
            return Err(Reject::Unparseable("authorized trip with zero parties".into()));
        }
        v
    };
    // Unshared trips carry exactly one party regardless of the raw field.
    let trips_pooled = if shared_authorized { trips_pooled } else { 1 };

    let pickup_area = optional_area(field(idx.pickup));
    let dropoff_area = optional_area(field(idx.dropoff));
    if pickup_area.is_none() {
        return Err(Reject::MissingOrigin);
    }
    if dropoff_area.is_none() {
        return Err(Reject::MissingDestination);
    }
    if fare <= 0.0 {
        return Err(Reject::FareZero);
    }
    if fare > 1000.0 {
        return Err(Reject::FareExcessive);
    }
    if duration_s == 0 {
        return Err(Reject::ZeroDuration);
    }
    if miles == 0.0 {
        return Err(Reject::ZeroMiles);
    }

    Ok(TripRecord {
        start,
        duration_s,
        miles,
        pickup_area,
        dropoff_area,
        fare_usd: fare,
        shared_authorized,
        trips_pooled,
    })
}

/// Stream the raw trip CSV, passing every surviving record to `keep` and
/// counting each rejection reason. In strict mode the first malformed row
/// aborts instead of being counted.
pub fn clean_trips<R, F>(input: R, map: &ColumnMap, strict: bool, mut keep: F) -> Result<RejectionStats>
where
    R: Read,
    F: FnMut(TripRecord) -> Result<()>,
{
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let idx = ColumnIndices::resolve(reader.headers()?, map)?;
    let mut stats = RejectionStats::default();

    for (row_no, record) in reader.records().enumerate() {
        let row = row_no as u64 + 2; // 1-based, after the header line
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if strict {
                    return Err(Error::CsvRow {
                        row,
                        message: e.to_string(),
                    });
                }
                stats.unparseable += 1;
                continue;
            }
        };
        match parse_row(&record, &idx) {
            Ok(trip) => {
                stats.kept += 1;
                keep(trip)?;
            }
            Err(Reject::Unparseable(message)) => {
                if strict {
                    return Err(Error::CsvRow { row, message });
                }
                stats.unparseable += 1;
            }
            Err(Reject::MissingOrigin) => stats.missing_origin += 1,
            Err(Reject::MissingDestination) => stats.missing_destination += 1,
            Err(Reject::FareZero) => stats.fare_zero += 1,
            Err(Reject::FareExcessive) => stats.fare_excessive += 1,
            Err(Reject::ZeroDuration) => stats.zero_duration += 1,
            Err(Reject::ZeroMiles) => stats.zero_miles += 1,
        }
    }
    Ok(stats)
}

/// Inclusive calendar-day window used for averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Window {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Window> {
        if end < start {
            return Err(Error::InvalidInput(format!(
                "window end {end} precedes start {start}"
            )));
        }
        Ok(Window { start, end })
    }

    pub fn days(&self) -> u32 {
        (self.end - self.start).num_days() as u32 + 1
    }

    pub fn contains(&self, ts: &NaiveDateTime) -> bool {
        let d = ts.date();
        d >= self.start && d <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    Solo,
    AuthorizedPooled,
}

impl std::fmt::Display for Dependent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dependent::Solo => "solo",
            Dependent::AuthorizedPooled => "authorized_pooled",
        })
    }
}

impl std::str::FromStr for Dependent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Dependent> {
        match s {
            "solo" => Ok(Dependent::Solo),
            "authorized_pooled" => Ok(Dependent::AuthorizedPooled),
            other => Err(Error::InvalidInput(format!(
                "unknown dependent `{other}` (expected solo or authorized_pooled)"
            ))),
        }
    }
}

/// Streaming per-area counters. Accumulators over disjoint shards of the
/// input merge associatively into the same totals as a single pass.
#[derive(Debug, Clone)]
pub struct DemandAccumulator {
    index: BTreeMap<String, usize>,
    area_ids: Vec<String>,
    solo: Vec<u64>,
    authorized: Vec<u64>,
    truly_pooled: Vec<u64>,
    window: Window,
    out_of_window: u64,
    unknown_area: u64,
}

impl DemandAccumulator {
    pub fn new(region: &StudyRegion, window: Window) -> DemandAccumulator {
        let area_ids = region.ids().to_vec();
        let index = area_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        DemandAccumulator {
            index,
            solo: vec![0; area_ids.len()],
            authorized: vec![0; area_ids.len()],
            truly_pooled: vec![0; area_ids.len()],
            area_ids,
            window,
            out_of_window: 0,
            unknown_area: 0,
        }
    }

    /// Trips aggregate by pickup area only.
    pub fn add(&mut self, trip: &TripRecord) {
        if !self.window.contains(&trip.start) {
            self.out_of_window += 1;
            return;
        }
        let Some(area) = trip.pickup_area.as_deref() else {
            self.unknown_area += 1;
            return;
        };
        let Some(&i) = self.index.get(area) else {
            self.unknown_area += 1;
            return;
        };
        if trip.shared_authorized {
            self.authorized[i] += 1;
            if trip.trips_pooled > 1 {
                self.truly_pooled[i] += 1;
            }
        } else {
            self.solo[i] += 1;
        }
    }

    pub fn merge(mut self, other: DemandAccumulator) -> Result<DemandAccumulator> {
        if self.area_ids != other.area_ids || self.window != other.window {
            return Err(Error::InvalidInput(
                "cannot merge demand accumulators with different areas or windows".into(),
            ));
        }
        for i in 0..self.solo.len() {
            self.solo[i] += other.solo[i];
            self.authorized[i] += other.authorized[i];
            self.truly_pooled[i] += other.truly_pooled[i];
        }
        self.out_of_window += other.out_of_window;
        self.unknown_area += other.unknown_area;
        Ok(self)
    }

    pub fn finish(self) -> DemandSeries {
        let days = f64::from(self.window.days());
        let scale = |v: &[u64]| v.iter().map(|&c| c as f64 / days).collect();
        DemandSeries {
            area_ids: self.area_ids,
            solo: scale(&self.solo),
            authorized_pooled: scale(&self.authorized),
            truly_pooled: scale(&self.truly_pooled),
            window_days: self.window.days(),
            out_of_window: self.out_of_window,
            unknown_area: self.unknown_area,
        }
    }
}

/// Average daily trips per area over the window, split by sharing status.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    pub area_ids: Vec<String>,
    pub solo: Vec<f64>,
    pub authorized_pooled: Vec<f64>,
    pub truly_pooled: Vec<f64>,
    pub window_days: u32,
    pub out_of_window: u64,
    pub unknown_area: u64,
}

impl DemandSeries {
    pub fn len(&self) -> usize {
        self.area_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area_ids.is_empty()
    }

    /// Share of authorized-pooled trips that actually carried more than one
    /// party, over the whole region.
    pub fn truly_shared_ratio(&self) -> Option<f64> {
        let auth: f64 = self.authorized_pooled.iter().sum();
        let truly: f64 = self.truly_pooled.iter().sum();
        (auth > 0.0).then(|| truly / auth)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# window_days={} out_of_window={} unknown_area={}",
            self.window_days, self.out_of_window, self.unknown_area
        )?;
        writeln!(
            out,
            "area_id,avg_daily_solo,avg_daily_authorized_pooled,avg_daily_truly_pooled"
        )?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.area_ids[i], self.solo[i], self.authorized_pooled[i], self.truly_pooled[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<DemandSeries> {
        let reader = BufReader::new(input);
        let mut series = DemandSeries {
            area_ids: Vec::new(),
            solo: Vec::new(),
            authorized_pooled: Vec::new(),
            truly_pooled: Vec::new(),
            window_days: 0,
            out_of_window: 0,
            unknown_area: 0,
        };
        let mut saw_meta = false;
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("area_id,") {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    let mut parts = kv.splitn(2, '=');
                    let key = parts.next().unwrap_or("");
                    let val = parts.next().unwrap_or("");
                    let bad = || Error::CsvRow {
                        row: ln as u64 + 1,
                        message: format!("bad meta `{kv}`"),
                    };
                    match key {
                        "window_days" => {
                            series.window_days = val.parse().map_err(|_| bad())?;
                            saw_meta = true;
                        }
                        "out_of_window" => series.out_of_window = val.parse().map_err(|_| bad())?,
                        "unknown_area" => series.unknown_area = val.parse().map_err(|_| bad())?,
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::CsvRow {
                    row: ln as u64 + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::CsvRow {
                    row: ln as u64 + 1,
                    message: format!("bad number `{s}`"),
                })
            };
            series.area_ids.push(fields[0].to_owned());
            series.solo.push(num(fields[1])?);
            series.authorized_pooled.push(num(fields[2])?);
            series.truly_pooled.push(num(fields[3])?);
        }
        if !saw_meta {
            return Err(Error::Csv("demand csv missing `# window_days=` header".into()));
        }
        Ok(series)
    }
}

/// Origin-destination counts for flow exports; bounded by (areas)^2 pairs.
#[derive(Debug, Clone, Default)]
pub struct OdAccumulator {
    counts: BTreeMap<(String, String), (u64, u64)>,
}

impl OdAccumulator {
    pub fn new() -> OdAccumulator {
        OdAccumulator::default()
    }

    pub fn add(&mut self, trip: &TripRecord) {
        let (Some(o), Some(d)) = (trip.pickup_area.as_ref(), trip.dropoff_area.as_ref()) else {
            return;
        };
        let entry = self.counts.entry((o.clone(), d.clone())).or_insert((0, 0));
        if trip.shared_authorized {
            entry.1 += 1;
        } else {
            entry.0 += 1;
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "origin,destination,solo,authorized_pooled")?;
        for ((o, d), (solo, auth)) in &self.counts {
            writeln!(out, "{o},{d},{solo},{auth}")?;
        }
        Ok(())
    }
}

/// Covariate values keyed by area id; one parsed CSV or injected column set.
#[derive(Debug, Clone)]
pub struct CovariateTable {
    pub columns: Vec<String>,
    rows: BTreeMap<String, Vec<f64>>,
}

impl CovariateTable {
    pub fn new(columns: Vec<String>, rows: BTreeMap<String, Vec<f64>>) -> Result<CovariateTable> {
        for (area, vals) in &rows {
            if vals.len() != columns.len() {
                return Err(Error::InvalidInput(format!(
                    "area `{area}` has {} values for {} columns",
                    vals.len(),
                    columns.len()
                )));
            }
        }
        Ok(CovariateTable { columns, rows })
    }

    pub fn single(column: &str, values: BTreeMap<String, f64>) -> CovariateTable {
        CovariateTable {
            columns: vec![column.to_owned()],
            rows: values.into_iter().map(|(k, v)| (k, vec![v])).collect(),
        }
    }

    pub fn get(&self, area: &str, column: usize) -> Option<f64> {
        self.rows.get(area).map(|r| r[column])
    }
}

/// First column is the area id; every other column is a named covariate.
pub fn read_covariates_csv<R: Read>(input: R) -> Result<CovariateTable> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Csv("covariate csv needs an id column and at least one value column".into()));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    for i in 1..columns.len() {
        if columns[..i].contains(&columns[i]) {
            return Err(Error::DuplicateCovariate(columns[i].clone()));
        }
    }
    let mut rows = BTreeMap::new();
    for (row_no, record) in reader.records().enumerate() {
        let row = row_no as u64 + 2;
        let record = record?;
        let area = record
            .get(0)
            .unwrap_or("")
            .trim()
            .to_owned();
        if area.is_empty() {
            return Err(Error::CsvRow {
                row,
                message: "empty area id".into(),
            });
        }
        let mut vals = Vec::with_capacity(columns.len());
        for (c, name) in columns.iter().enumerate() {
            let raw = record.get(c + 1).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::CsvRow {
                row,
                message: format!("bad value `{raw}` for `{name}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvRow {
                    row,
                    message: format!("non-finite value for `{name}`"),
                });
            }
            vals.push(v);
        }
        if rows.insert(area.clone(), vals).is_some() {
            return Err(Error::DuplicateAreaId(area));
        }
    }
    Ok(CovariateTable { columns, rows })
}

/// Unit-scaling rules keyed by raw column name: (new name, factor).
fn scaling_rule(raw: &str) -> (String, f64) {
    match raw {
        "pop_density_sq_mi" => ("pop_density_per_100k_sq_mi".into(), 1e-5),
        "bars_restaurants_sq_mi" => ("bar_restaurant_density_per_1k_sq_mi".into(), 1e-3),
        other => (other.to_owned(), 1.0),
    }
}

/// Model-ready table: log demand densities plus covariates, ordered by
/// region index. Areas with zero trips for a dependent are excluded from
/// that dependent's model (log undefined) and carry NaN in its y column.
#[derive(Debug, Clone)]
pub struct AreaPanel {
    pub area_ids: Vec<String>,
    pub area_sq_mi: Vec<f64>,
    pub y_solo: Vec<f64>,
    pub y_pooled: Vec<f64>,
    pub excluded_solo: Vec<usize>,
    pub excluded_pooled: Vec<usize>,
    pub covariate_names: Vec<String>,
    pub covariates: DMatrix<f64>,
    pub lag_columns: Vec<String>,
}

/// Dense per-dependent design: rows are the kept region indices.
#[derive(Debug, Clone)]
pub struct Design {
    pub kept: Vec<usize>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub lagged: Vec<usize>,
}

pub fn build_panel(
    region: &StudyRegion,
    demand: &DemandSeries,
    tables: &[&CovariateTable],
    lag_selection: &[String],
) -> Result<AreaPanel> {
    let n = region.len();
    if demand.area_ids != region.ids() {
        return Err(Error::InvalidInput(
            "demand series areas do not match the region".into(),
        ));
    }

    let mut covariate_names: Vec<String> = Vec::new();
    let mut scaled_columns: Vec<Vec<f64>> = Vec::new();
    for table in tables {
        for (c, raw_name) in table.columns.iter().enumerate() {
            let (name, factor) = scaling_rule(raw_name);
            if covariate_names.contains(&name) {
                return Err(Error::DuplicateCovariate(name));
            }
            let mut col = Vec::with_capacity(n);
            for (i, area) in region.ids().iter().enumerate() {
                let v = table.get(area, c).ok_or_else(|| Error::MissingCovariate {
                    column: name.clone(),
                    area: region.ids()[i].clone(),
                })?;
                col.push(v * factor);
            }
            covariate_names.push(name);
            scaled_columns.push(col);
        }
    }
    for lag in lag_selection {
        if !covariate_names.contains(lag) {
            return Err(Error::UnknownCovariate(lag.clone()));
        }
    }

    let area_sq_mi: Vec<f64> = region.areas.iter().map(|a| a.area_sq_mi).collect();
    let log_density = |avg: &[f64], excluded: &mut Vec<usize>| -> Vec<f64> {
        avg.iter()
            .enumerate()
            .map(|(i, &v)| {
                if v > 0.0 {
                    (v / area_sq_mi[i]).ln()
                } else {
                    excluded.push(i);
                    f64::NAN
                }
            })
            .collect()
    };
    let mut excluded_solo = Vec::new();
    let mut excluded_pooled = Vec::new();
    let y_solo = log_density(&demand.solo, &mut excluded_solo);
    let y_pooled = log_density(&demand.authorized_pooled, &mut excluded_pooled);

    let covariates = DMatrix::from_fn(n, covariate_names.len(), |r, c| scaled_columns[c][r]);

    Ok(AreaPanel {
        area_ids: region.ids().to_vec(),
        area_sq_mi,
        y_solo,
        y_pooled,
        excluded_solo,
        excluded_pooled,
        covariate_names,
        covariates,
        lag_columns: lag_selection.to_vec(),
    })
}

impl AreaPanel {
    pub fn n(&self) -> usize {
        self.area_ids.len()
    }

    pub fn y(&self, dep: Dependent) -> &[f64] {
        match dep {
            Dependent::Solo => &self.y_solo,
            Dependent::AuthorizedPooled => &self.y_pooled,
        }
    }

    pub fn excluded(&self, dep: Dependent) -> &[usize] {
        match dep {
            Dependent::Solo => &self.excluded_solo,
            Dependent::AuthorizedPooled => &self.excluded_pooled,
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// Design over the requested covariates, dropping this dependent's
    /// excluded areas. `lagged` must be a subset of `covariates`.
    pub fn design(&self, dep: Dependent, covariates: &[String], lagged: &[String]) -> Result<Design> {
        let mut cols = Vec::with_capacity(covariates.len());
        for name in covariates {
            cols.push(
                self.column(name)
                    .ok_or_else(|| Error::UnknownCovariate(name.clone()))?,
            );
        }
        let mut lag_idx = Vec::with_capacity(lagged.len());
        for name in lagged {
            let pos = covariates
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidInput(format!(
                    "lagged column `{name}` is not among the model covariates"
                )))?;
            lag_idx.push(pos);
        }

        let y_all = self.y(dep);
        let kept: Vec<usize> = (0..self.n()).filter(|&i| y_all[i].is_finite()).collect();
        if kept.is_empty() {
            return Err(Error::NoSurvivingRows);
        }
        let y = DVector::from_iterator(kept.len(), kept.iter().map(|&i| y_all[i]));
        let x = DMatrix::from_fn(kept.len(), cols.len(), |r, c| {
            self.covariates[(kept[r], cols[c])]
        });
        Ok(Design {
            kept,
            y,
            x,
            names: covariates.to_vec(),
            lagged: lag_idx,
        })
    }

    /// Design over every panel covariate with the panel's own lag set.
    pub fn default_design(&self, dep: Dependent) -> Result<Design> {
        let names = self.covariate_names.clone();
        let lagged = self.lag_columns.clone();
        self.design(dep, &names, &lagged)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        writeln!(
            out,
            "# excluded_solo={} excluded_pooled={}",
            join(&self.excluded_solo),
            join(&self.excluded_pooled)
        )?;
        write!(out, "area_id,area_sq_mi,y_solo,y_pooled")?;
        for name in &self.covariate_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for i in 0..self.n() {
            write!(
                out,
                "{},{},{},{}",
                self.area_ids[i], self.area_sq_mi[i], self.y_solo[i], self.y_pooled[i]
            )?;
            for c in 0..self.covariate_names.len() {
                write!(out, ",{}", self.covariates[(i, c)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
