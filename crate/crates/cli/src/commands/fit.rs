//! `geodemand fit`: the full modeling pass for both dependents. Each
//! dependent runs OLS, residual Moran, both LM tests, the model selection
//! rule, the spatial Durbin fit, and the impact tables; a failure in one
//! dependent is recorded in its own report and does not stop the other.

use std::collections::BTreeMap;
use std::io::Write;

use geodemand_core::econometrics::{lm_error_test, lm_lag_test, morans_i, ols_fit, select_model};
use geodemand_core::geo::{contiguity_adjacency, Adjacency, AreaUnit, Ring};
use geodemand_core::impacts::{impact_inference, impacts_paper_closed_form, ImpactMeasure};
use geodemand_core::ingest::Dependent;
use geodemand_core::sdm::{build_design, fit_sdm};
use geodemand_core::stats::normal_two_sided_p;
use geodemand_core::weights::build_weights;
use geodemand_core::{Error, ImpactTable, ModelSpec};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::io::{self, json_f64, Meta};

use super::PanelBundle;

const DEPENDENTS: [Dependent; 2] = [Dependent::Solo, Dependent::AuthorizedPooled];

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    super::ensure_output_dir(cfg)?;
    let bundle = super::load_panel(cfg)?;
    let adjacency = contiguity_adjacency(&bundle.region, cfg.contiguity, cfg.contiguity_tol_ft);
    let meta = Meta {
        stage: "fit",
        config_hash: cfg.stage_hash_fit()?,
        seed: cfg.seed,
    };

    write_weights(cfg, &meta, &adjacency)?;

    let mut residual_maps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut first_failure: Option<anyhow::Error> = None;
    for dep in DEPENDENTS {
        let file = cfg.out(&format!("fit_{dep}.json"));
        match fit_one(cfg, &bundle, &adjacency, dep) {
            Ok(out) => {
                let mut doc = json!({ "meta": meta.json(), "dependent": dep.to_string() });
                merge(&mut doc, out.report);
                io::write_json(&file, &doc)?;
                io::write_bytes(&cfg.out(&format!("impacts_{dep}.csv")), &out.impacts_csv)?;
                let mut map = vec![f64::NAN; bundle.region.len()];
                for (&area_idx, &r) in out.kept.iter().zip(&out.residuals) {
                    map[area_idx] = r;
                }
                residual_maps.insert(dep.to_string(), map);
                eprintln!(
                    "fit {dep}: n={} rho={:.4} pseudo_r2={:.4}",
                    out.n_used, out.rho, out.pseudo_r2
                );
            }
            Err(e) => {
                let doc = json!({
                    "meta": meta.json(),
                    "dependent": dep.to_string(),
                    "error": { "message": format!("{e:#}"), "class": error_class(&e) },
                });
                io::write_json(&file, &doc)?;
                eprintln!("fit {dep}: failed: {e:#}");
                first_failure.get_or_insert(e);
            }
        }
    }

    let choropleth = build_choropleth(&meta, &bundle, &residual_maps);
    io::write_json(&cfg.out("choropleth.geojson"), &choropleth)?;

    match first_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn error_class(e: &anyhow::Error) -> Value {
    match e.downcast_ref::<Error>() {
        Some(core) => json!(match core.class() {
            geodemand_core::ErrorClass::Validation => "validation",
            geodemand_core::ErrorClass::Data => "data",
            geodemand_core::ErrorClass::Numerical => "numerical",
        }),
        None => Value::Null,
    }
}

/// Shallow-merge `body`'s top-level keys into `doc`.
fn merge(doc: &mut Value, body: Value) {
    if let (Value::Object(target), Value::Object(source)) = (doc, body) {
        for (k, v) in source {
            target.insert(k, v);
        }
    }
}

struct DepOutput {
    kept: Vec<usize>,
    residuals: Vec<f64>,
    report: Value,
    impacts_csv: Vec<u8>,
    n_used: usize,
    rho: f64,
    pseudo_r2: f64,
}

fn fit_one(
    cfg: &RunConfig,
    bundle: &PanelBundle,
    adjacency: &Adjacency,
    dep: Dependent,
) -> anyhow::Result<DepOutput> {
    let panel = &bundle.panel;
    let design = panel.design(dep, &cfg.model_covariates, &cfg.lagged)?;
    let w = build_weights(&adjacency.subset(&design.kept))?;
    let z = build_design(&design.x, &design.lagged, &w)?;

    let ols = ols_fit(&design.y, &z)?;
    let moran_ols = morans_i(&ols.residuals, &w, cfg.permutations, cfg.seed)?;
    let lm_lag = lm_lag_test(&ols, &w, &design.y, &z)?;
    let lm_error = lm_error_test(&ols, &w)?;
    let choice = select_model(&lm_lag, &lm_error, cfg.alpha);

    let spec = ModelSpec {
        dependent: dep.to_string(),
        covariates: cfg.model_covariates.clone(),
        lagged: cfg.lagged.clone(),
        include_intercept: true,
    };
    let fit = fit_sdm(panel, &spec, &w)?;
    let moran_sdm = morans_i(&fit.residuals, &w, cfg.permutations, cfg.seed)?;
    let exact = impact_inference(&fit, &w, cfg.mc_draws, cfg.seed)?;
    let closed_form = impacts_paper_closed_form(&fit)?;

    let ols_labels: Vec<String> = std::iter::once("intercept".to_owned())
        .chain(design.names.iter().cloned())
        .chain(design.lagged.iter().map(|&i| format!("W_{}", design.names[i])))
        .collect();
    let ols_coefficients: Vec<Value> = ols_labels
        .iter()
        .zip(ols.coefficients.iter())
        .map(|(name, &value)| json!({ "name": name, "value": json_f64(value) }))
        .collect();

    let se = fit.std_errors();
    let named = |name: &str, value: f64, std_error: f64| {
        let z_stat = if std_error > 0.0 { value / std_error } else { f64::NAN };
        json!({
            "name": name,
            "value": json_f64(value),
            "std_error": json_f64(std_error),
            "z": json_f64(z_stat),
            "p": json_f64(if z_stat.is_nan() { f64::NAN } else { normal_two_sided_p(z_stat) }),
        })
    };
    let beta_view: Vec<Value> = fit
        .beta
        .iter()
        .enumerate()
        .map(|(i, (name, v))| named(name, *v, se[i]))
        .collect();
    let gamma_view: Vec<Value> = fit
        .gamma
        .iter()
        .enumerate()
        .map(|(j, (name, v))| named(name, *v, se[fit.beta.len() + j]))
        .collect();
    let rho_view = named("rho", fit.rho, *se.last().expect("rho slot"));

    let excluded: Vec<String> = panel
        .excluded(dep)
        .iter()
        .map(|&i| panel.area_ids[i].clone())
        .collect();

    let report = json!({
        "n_areas": panel.n(),
        "excluded_areas": excluded,
        "n_used": fit.n,
        "ols": {
            "coefficients": ols_coefficients,
            "sigma2": json_f64(ols.sigma2),
            "loglik": json_f64(ols.loglik),
            "aic": json_f64(ols.aic),
        },
        "diagnostics": {
            "moran_ols_residuals": moran_ols,
            "lm_lag": lm_lag,
            "lm_error": lm_error,
            "moran_sdm_residuals": moran_sdm,
        },
        "selection": {
            "choice": choice,
            "alpha": cfg.alpha,
            "warning": choice.warning(),
        },
        "sdm": {
            "rho": rho_view,
            "beta": beta_view,
            "gamma": gamma_view,
            "sigma2": json_f64(fit.sigma2),
            "loglik": json_f64(fit.loglik),
            "aic": json_f64(fit.aic),
            "pseudo_r2_nagelkerke": json_f64(fit.pseudo_r2_nagelkerke),
            "w_fingerprint": fit.w_fingerprint,
        },
        "impacts": { "exact": exact, "closed_form": closed_form },
    });

    let impacts_csv = impacts_csv(cfg, &exact, &closed_form)?;
    Ok(DepOutput {
        kept: design.kept,
        residuals: fit.residuals.iter().copied().collect(),
        report,
        impacts_csv,
        n_used: fit.n,
        rho: fit.rho,
        pseudo_r2: fit.pseudo_r2_nagelkerke,
    })
}

fn impacts_csv(cfg: &RunConfig, exact: &ImpactTable, closed_form: &ImpactTable) -> anyhow::Result<Vec<u8>> {
    let meta = Meta {
        stage: "fit",
        config_hash: cfg.stage_hash_fit()?,
        seed: cfg.seed,
    };
    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    writeln!(
        buf,
        "method,name,beta,gamma,direct,direct_sd,direct_z,direct_p,\
         indirect,indirect_sd,indirect_z,indirect_p,total,total_sd,total_z,total_p"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let measure = |m: &ImpactMeasure| {
        format!("{},{},{},{}", m.value, opt(m.sd), opt(m.z), opt(m.p))
    };
    for (label, table) in [("exact", exact), ("closed_form", closed_form)] {
        for row in &table.rows {
            writeln!(
                buf,
                "{label},{},{},{},{},{},{}",
                row.name,
                row.beta,
                row.gamma,
                measure(&row.direct),
                measure(&row.indirect),
                measure(&row.total),
            )?;
        }
    }
    Ok(buf)
}

fn write_weights(cfg: &RunConfig, meta: &Meta, adjacency: &Adjacency) -> anyhow::Result<()> {
    let w = build_weights(adjacency)?;
    let mut buf = Vec::new();
    writeln!(buf, "{}", meta.comment_line())?;
    w.write_triplet_csv(&mut buf)?;
    io::write_bytes(&cfg.out("weights.csv"), &buf)
}

fn build_choropleth(
    meta: &Meta,
    bundle: &PanelBundle,
    residual_maps: &BTreeMap<String, Vec<f64>>,
) -> Value {
    let PanelBundle {
        region,
        demand,
        panel,
    } = bundle;
    let sdi = panel.column("sdi_score");
    let tat = panel.column("tat_minutes");
    let pick = |col: Option<usize>, i: usize| {
        col.map_or(Value::Null, |j| json_f64(panel.covariates[(i, j)]))
    };
    let residual = |dep: &str, i: usize| {
        residual_maps
            .get(dep)
            .map_or(Value::Null, |v| json_f64(v[i]))
    };

    let features: Vec<Value> = region
        .areas
        .iter()
        .enumerate()
        .map(|(i, area)| {
            json!({
                "type": "Feature",
                "id": area.id,
                "properties": {
                    "area_id": area.id,
                    "name": area.name,
                    "area_sq_mi": json_f64(area.area_sq_mi),
                    "avg_daily_solo": json_f64(demand.solo[i]),
                    "avg_daily_authorized_pooled": json_f64(demand.authorized_pooled[i]),
                    "y_solo": json_f64(panel.y_solo[i]),
                    "y_authorized_pooled": json_f64(panel.y_pooled[i]),
                    "sdi_score": pick(sdi, i),
                    "tat_minutes": pick(tat, i),
                    "resid_solo": residual("solo", i),
                    "resid_authorized_pooled": residual("authorized_pooled", i),
                },
                "geometry": area_geometry(area),
            })
        })
        .collect();

    json!({
        "type": "FeatureCollection",
        "meta": meta.json(),
        "features": features,
    })
}

/// Rebuild GeoJSON geometry from the stored rings. Holes follow the
/// exterior they were parsed with, so attaching each hole to the most
/// recent exterior restores the original polygon grouping.
fn area_geometry(area: &AreaUnit) -> Value {
    let ring_coords = |r: &Ring| -> Value {
        Value::Array(
            r.points
                .iter()
                .map(|p| json!([p.lon, p.lat]))
                .collect(),
        )
    };
    let mut polygons: Vec<Vec<Value>> = Vec::new();
    for ring in &area.rings {
        if ring.hole {
            if let Some(last) = polygons.last_mut() {
                last.push(ring_coords(ring));
            }
        } else {
            polygons.push(vec![ring_coords(ring)]);
        }
    }
    if polygons.len() == 1 {
        json!({ "type": "Polygon", "coordinates": polygons.pop() })
    } else {
        json!({ "type": "MultiPolygon", "coordinates": polygons })
    }
}

pub(crate) fn fit_report_name(dep: &str) -> String {
    format!("fit_{dep}.json")
}
