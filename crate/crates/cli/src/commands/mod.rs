//! Subcommand implementations. Each command reads its inputs, writes its
//! outputs under the configured output directory, and communicates with the
//! other stages only through those files.

pub mod fit;
pub mod ingest;
pub mod report;
pub mod scenario;
pub mod sdi;
pub mod tat;

use std::fs;
use std::fs::File;

use anyhow::Context;
use geodemand_core::geo::{load_region, StudyRegion};
use geodemand_core::ingest::{build_panel, read_covariates_csv, AreaPanel, DemandSeries};

use crate::config::RunConfig;
use crate::io;

pub(crate) fn load_region_file(cfg: &RunConfig) -> anyhow::Result<StudyRegion> {
    let bytes = fs::read(&cfg.region).with_context(|| format!("reading {}", cfg.region.display()))?;
    Ok(load_region(&bytes)?)
}

pub(crate) fn ensure_output_dir(cfg: &RunConfig) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))
}

pub(crate) struct PanelBundle {
    pub region: StudyRegion,
    pub demand: DemandSeries,
    pub panel: AreaPanel,
}

/// Assemble the modeling panel from the upstream stage outputs, refusing
/// any whose embedded config hash no longer matches the current config.
pub(crate) fn load_panel(cfg: &RunConfig) -> anyhow::Result<PanelBundle> {
    cfg.require_inputs(&[&cfg.region, &cfg.covariates])?;
    let region = load_region_file(cfg)?;

    let demand_text =
        io::require_fresh_csv(&cfg.out("demand.csv"), "ingest", &cfg.stage_hash_ingest()?)?;
    let demand = DemandSeries::read_csv(demand_text.as_bytes())?;

    let sdi_text = io::require_fresh_csv(&cfg.out("sdi_scores.csv"), "sdi", &cfg.stage_hash_sdi()?)?;
    let sdi_table = read_covariates_csv(sdi_text.as_bytes())?;

    let tat_text = io::require_fresh_csv(&cfg.out("tat_areas.csv"), "tat", &cfg.stage_hash_tat()?)?;
    let tat_table = read_covariates_csv(tat_text.as_bytes())?;

    let file = File::open(&cfg.covariates)
        .with_context(|| format!("opening {}", cfg.covariates.display()))?;
    let cov_table = read_covariates_csv(file)?;

    let panel = build_panel(&region, &demand, &[&cov_table, &sdi_table, &tat_table], &cfg.lagged)?;
    Ok(PanelBundle {
        region,
        demand,
        panel,
    })
}
