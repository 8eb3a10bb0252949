//! `geodemand scenario`: translate fitted impact measures into ride-count
//! changes and elasticities for each entry of a scenario file.

use std::collections::BTreeMap;

use geodemand_core::impacts::{elasticity_at_mean, ride_delta};
use geodemand_core::ingest::{Dependent, DemandSeries};
use geodemand_core::stats::mean;
use geodemand_core::Error;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::io::{self, json_f64, Meta, Stale};

use super::PanelBundle;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioEntry {
    name: String,
    /// Which fitted model to read impacts from: solo or authorized_pooled.
    model: String,
    covariate: String,
    /// Impact measure to apply: direct, indirect or total.
    measure: String,
    /// Impact method: exact (default) or closed_form.
    #[serde(default = "default_method")]
    method: String,
    delta_x: f64,
    /// Region-wide average daily rides; computed from the ingest output
    /// when omitted.
    baseline_rides: Option<f64>,
    /// Covariate mean for the elasticity; computed from the panel when
    /// omitted (and skipped if that mean is not positive).
    mean_x: Option<f64>,
}

fn default_method() -> String {
    "exact".to_owned()
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let path = cfg.scenarios.clone().ok_or_else(|| {
        Error::InvalidInput("no scenario file: set paths.scenarios or pass --scenarios".into())
    })?;
    super::ensure_output_dir(cfg)?;
    let meta = Meta {
        stage: "scenario",
        config_hash: cfg.stage_hash_scenario()?,
        seed: cfg.seed,
    };

    let text = io::read_to_string(&path)?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("parsing {}: {e}", path.display())))?;

    let fit_hash = cfg.stage_hash_fit()?;
    let mut fits: BTreeMap<String, Value> = BTreeMap::new();
    let mut demand: Option<DemandSeries> = None;
    let mut panel: Option<PanelBundle> = None;

    let mut results = Vec::with_capacity(file.scenarios.len());
    for entry in &file.scenarios {
        let dep: Dependent = entry.model.parse()?;
        let fit = lookup_fit(cfg, &mut fits, dep, &fit_hash)?;
        let impact = lookup_impact(&fit, entry)?;

        let baseline = match entry.baseline_rides {
            Some(b) => b,
            None => {
                let d = load_demand(cfg, &mut demand)?;
                match dep {
                    Dependent::Solo => d.solo.iter().sum(),
                    Dependent::AuthorizedPooled => d.authorized_pooled.iter().sum(),
                }
            }
        };
        let delta = ride_delta(baseline, impact, entry.delta_x)?;

        let (mean_x, elasticity) = match entry.mean_x {
            Some(m) => (Some(m), Some(elasticity_at_mean(impact, m)?)),
            None => {
                let bundle = load_bundle(cfg, &mut panel)?;
                let p = &bundle.panel;
                let col_mean = p.column(&entry.covariate).map(|j| {
                    let vals: Vec<f64> = (0..p.n()).map(|i| p.covariates[(i, j)]).collect();
                    mean(&vals)
                });
                match col_mean {
                    Some(m) if m > 0.0 => (Some(m), Some(elasticity_at_mean(impact, m)?)),
                    _ => (None, None),
                }
            }
        };

        results.push(json!({
            "name": entry.name,
            "model": dep.to_string(),
            "covariate": entry.covariate,
            "measure": entry.measure,
            "method": entry.method,
            "impact": json_f64(impact),
            "delta_x": json_f64(entry.delta_x),
            "baseline_rides": json_f64(delta.baseline_rides),
            "delta_rides": json_f64(delta.delta_r),
            "mean_x": mean_x.map_or(Value::Null, json_f64),
            "elasticity_pct": elasticity.map_or(Value::Null, json_f64),
        }));
        eprintln!(
            "scenario {}: {} {} of {} -> delta_rides {:.1}",
            entry.name, entry.method, entry.measure, entry.covariate, delta.delta_r
        );
    }

    let doc = json!({ "meta": meta.json(), "results": results });
    io::write_json(&cfg.out("scenarios_report.json"), &doc)?;
    Ok(())
}

fn lookup_fit(
    cfg: &RunConfig,
    cache: &mut BTreeMap<String, Value>,
    dep: Dependent,
    fit_hash: &str,
) -> anyhow::Result<Value> {
    let key = dep.to_string();
    if let Some(v) = cache.get(&key) {
        return Ok(v.clone());
    }
    let path = cfg.out(&super::fit::fit_report_name(&key));
    let doc = io::require_fresh_json(&path, "fit", fit_hash)?;
    if doc.get("error").is_some() {
        return Err(Stale(format!(
            "{} records a failed fit; rerun `geodemand fit` and fix that model first",
            path.display()
        ))
        .into());
    }
    cache.insert(key.clone(), doc.clone());
    Ok(doc)
}

fn lookup_impact(fit: &Value, entry: &ScenarioEntry) -> anyhow::Result<f64> {
    let method = match entry.method.as_str() {
        "exact" | "closed_form" => entry.method.as_str(),
        other => {
            return Err(Error::InvalidInput(format!(
                "scenario `{}`: unknown method `{other}` (expected exact or closed_form)",
                entry.name
            ))
            .into())
        }
    };
    match entry.measure.as_str() {
        "direct" | "indirect" | "total" => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "scenario `{}`: unknown measure `{other}` (expected direct, indirect or total)",
                entry.name
            ))
            .into())
        }
    }
    let rows = fit["impacts"][method]["rows"]
        .as_array()
        .ok_or_else(|| Stale("fit report lacks impact rows; rerun `geodemand fit`".to_owned()))?;
    let row = rows
        .iter()
        .find(|r| r["name"].as_str() == Some(entry.covariate.as_str()))
        .ok_or_else(|| Error::UnknownCovariate(entry.covariate.clone()))?;
    row[entry.measure.as_str()]["value"]
        .as_f64()
        .ok_or_else(|| Stale("impact row lacks a value; rerun `geodemand fit`".to_owned()).into())
}

fn load_demand<'a>(cfg: &RunConfig, slot: &'a mut Option<DemandSeries>) -> anyhow::Result<&'a DemandSeries> {
    if slot.is_none() {
        let text = io::require_fresh_csv(&cfg.out("demand.csv"), "ingest", &cfg.stage_hash_ingest()?)?;
        *slot = Some(DemandSeries::read_csv(text.as_bytes())?);
    }
    Ok(slot.as_ref().expect("just filled"))
}

fn load_bundle<'a>(cfg: &RunConfig, slot: &'a mut Option<PanelBundle>) -> anyhow::Result<&'a PanelBundle> {
    if slot.is_none() {
        *slot = Some(super::load_panel(cfg)?);
    }
    Ok(slot.as_ref().expect("just filled"))
}
