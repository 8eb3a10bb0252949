//! `geodemand tat`: tessellate the region into hexes, time the walk from
//! each hex center to its nearest rail station, and average per area. The
//! detour multiplier is folded into the effective walking speed since it
//! scales every distance equally.

use std::fs::File;
use std::io::Write;

use anyhow::Context;
use geodemand_core::geo::hex_tessellate;
use geodemand_core::tat::{read_stations_csv, transit_access_time};

use crate::config::RunConfig;
use crate::io::{self, Meta};

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.require_inputs(&[&cfg.region, &cfg.stations])?;
    super::ensure_output_dir(cfg)?;
    let region = super::load_region_file(cfg)?;
    let meta = Meta {
        stage: "tat",
        config_hash: cfg.stage_hash_tat()?,
        seed: cfg.seed,
    };

    let file =
        File::open(&cfg.stations).with_context(|| format!("opening {}", cfg.stations.display()))?;
    let stations = read_stations_csv(file)?;
    let grid = hex_tessellate(&region, cfg.hex_edge_ft)?;
    let result = transit_access_time(&region, &grid, &stations, cfg.effective_walking_speed())?;

    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    writeln!(buf, "lon,lat,area_id,minutes")?;
    for (cell, minutes) in grid.cells.iter().zip(&result.cell_minutes) {
        let area = cell.area_id.as_deref().unwrap_or("");
        writeln!(buf, "{},{},{area},{minutes}", cell.center.lon, cell.center.lat)?;
    }
    io::write_bytes(&cfg.out("tat_cells.csv"), &buf)?;

    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    writeln!(buf, "area_id,tat_minutes")?;
    for (id, minutes) in result.area_ids.iter().zip(&result.area_minutes) {
        writeln!(buf, "{id},{minutes}")?;
    }
    io::write_bytes(&cfg.out("tat_areas.csv"), &buf)?;

    eprintln!(
        "tat: {} hex cells ({} tagged), {} stations, area means written to {}",
        grid.cells.len(),
        grid.tagged_count(),
        stations.len(),
        cfg.output_dir.display()
    );
    Ok(())
}
