//! `geodemand ingest`: stream the raw trip CSV once, producing per-area
//! average daily demand, origin-destination flow counts, and a rejection
//! report.

use std::fs::File;
use std::io::{BufReader, Write};

use anyhow::Context;
use geodemand_core::ingest::{clean_trips, DemandAccumulator, OdAccumulator};
use geodemand_core::Error;
use serde_json::json;

use crate::config::RunConfig;
use crate::io::{self, Meta};

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.require_inputs(&[&cfg.region, &cfg.trips])?;
    super::ensure_output_dir(cfg)?;
    let region = super::load_region_file(cfg)?;
    let meta = Meta {
        stage: "ingest",
        config_hash: cfg.stage_hash_ingest()?,
        seed: cfg.seed,
    };

    let mut demand = DemandAccumulator::new(&region, cfg.window);
    let mut od = OdAccumulator::new();
    let file = File::open(&cfg.trips).with_context(|| format!("opening {}", cfg.trips.display()))?;
    let stats = clean_trips(BufReader::new(file), &cfg.columns, false, |trip| {
        demand.add(&trip);
        od.add(&trip);
        Ok(())
    })?;
    if stats.kept == 0 {
        return Err(Error::NoSurvivingRows.into());
    }
    let series = demand.finish();

    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    series.write_csv(&mut buf)?;
    io::write_bytes(&cfg.out("demand.csv"), &buf)?;

    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    od.write_csv(&mut buf)?;
    io::write_bytes(&cfg.out("od_flows.csv"), &buf)?;

    let report = json!({
        "meta": meta.json(),
        "window_days": series.window_days,
        "rows_total": stats.total(),
        "rows_kept": stats.kept,
        "rows_rejected": stats.rejected(),
        "rejections": stats,
        "out_of_window": series.out_of_window,
        "unknown_area": series.unknown_area,
        "truly_shared_ratio": series.truly_shared_ratio().map_or(serde_json::Value::Null, io::json_f64),
    });
    io::write_json(&cfg.out("rejections.json"), &report)?;

    eprintln!(
        "ingest: kept {} of {} rows; demand for {} areas written to {}",
        stats.kept,
        stats.total(),
        series.len(),
        cfg.output_dir.display()
    );
    Ok(())
}
