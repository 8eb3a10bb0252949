//! `geodemand sdi`: fit the single-factor disadvantage index from the ACS
//! item table and score every area.

use std::fs::File;
use std::io::Write;

use anyhow::Context;
use geodemand_core::ingest::read_covariates_csv;
use geodemand_core::sdi::{fit_single_factor, ItemMatrix};
use geodemand_core::Error;
use nalgebra::DMatrix;
use serde_json::json;

use crate::config::RunConfig;
use crate::io::{self, Meta};

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.require_inputs(&[&cfg.region, &cfg.acs_items])?;
    super::ensure_output_dir(cfg)?;
    let region = super::load_region_file(cfg)?;
    let meta = Meta {
        stage: "sdi",
        config_hash: cfg.stage_hash_sdi()?,
        seed: cfg.seed,
    };

    let file =
        File::open(&cfg.acs_items).with_context(|| format!("opening {}", cfg.acs_items.display()))?;
    let table = read_covariates_csv(file)?;
    let ids = region.ids();
    let names = table.columns.clone();
    let mut data = DMatrix::zeros(ids.len(), names.len());
    for (i, id) in ids.iter().enumerate() {
        for (j, name) in names.iter().enumerate() {
            data[(i, j)] = table.get(id, j).ok_or_else(|| Error::MissingCovariate {
                column: name.clone(),
                area: id.clone(),
            })?;
        }
    }
    let items = ItemMatrix::new(names, data)?;
    let model = fit_single_factor(&items)?;

    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    writeln!(buf, "area_id,sdi_score")?;
    for (id, score) in ids.iter().zip(&model.scores) {
        writeln!(buf, "{id},{score}")?;
    }
    io::write_bytes(&cfg.out("sdi_scores.csv"), &buf)?;

    let report = json!({ "meta": meta.json(), "model": model });
    io::write_json(&cfg.out("sdi_model.json"), &report)?;

    eprintln!(
        "sdi: alpha {:.4}, {} items, {} flagged, scores written to {}",
        model.alpha,
        model.item_names.len(),
        model.flagged.len(),
        cfg.output_dir.display()
    );
    Ok(())
}
