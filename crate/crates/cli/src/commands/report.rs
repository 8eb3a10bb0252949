//! `geodemand report`: fold every stage output into one markdown document.
//! The report embeds the same provenance block the machine-readable outputs
//! carry: tool version, per-stage config hashes, and the seed.

use std::fmt::Write as _;

use geodemand_core::stats::significance_stars;
use serde_json::Value;

use crate::config::RunConfig;
use crate::io::{self, VERSION};

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    super::ensure_output_dir(cfg)?;
    let ingest_hash = cfg.stage_hash_ingest()?;
    let sdi_hash = cfg.stage_hash_sdi()?;
    let tat_hash = cfg.stage_hash_tat()?;
    let fit_hash = cfg.stage_hash_fit()?;

    let rejections = io::require_fresh_json(&cfg.out("rejections.json"), "ingest", &ingest_hash)?;
    let sdi = io::require_fresh_json(&cfg.out("sdi_model.json"), "sdi", &sdi_hash)?;
    let tat_text = io::require_fresh_csv(&cfg.out("tat_areas.csv"), "tat", &tat_hash)?;
    let fits: Vec<Value> = ["solo", "authorized_pooled"]
        .iter()
        .map(|dep| {
            io::require_fresh_json(&cfg.out(&super::fit::fit_report_name(dep)), "fit", &fit_hash)
        })
        .collect::<anyhow::Result<_>>()?;
    let scenarios = match &cfg.scenarios {
        Some(_) => {
            let path = cfg.out("scenarios_report.json");
            if path.exists() {
                Some(io::require_fresh_json(&path, "scenario", &cfg.stage_hash_scenario()?)?)
            } else {
                None
            }
        }
        None => None,
    };

    let mut md = String::new();
    writeln!(md, "# Demand pipeline report\n")?;
    writeln!(md, "## Run metadata\n")?;
    writeln!(md, "| field | value |")?;
    writeln!(md, "|---|---|")?;
    writeln!(md, "| tool | geodemand v{VERSION} |")?;
    writeln!(md, "| seed | {} |", cfg.seed)?;
    writeln!(md, "| window | {}..{} ({} days) |", cfg.window.start, cfg.window.end, cfg.window.days())?;
    writeln!(md, "| config hash (ingest) | `{ingest_hash}` |")?;
    writeln!(md, "| config hash (sdi) | `{sdi_hash}` |")?;
    writeln!(md, "| config hash (tat) | `{tat_hash}` |")?;
    writeln!(md, "| config hash (fit) | `{fit_hash}` |")?;
    writeln!(md)?;

    ingest_section(&mut md, &rejections)?;
    sdi_section(&mut md, &sdi)?;
    tat_section(&mut md, &tat_text)?;
    for fit in &fits {
        fit_section(&mut md, fit)?;
    }
    if let Some(sc) = &scenarios {
        scenario_section(&mut md, sc)?;
    }

    io::write_bytes(&cfg.out("report.md"), md.as_bytes())?;
    eprintln!("report: written to {}", cfg.out("report.md").display());
    Ok(())
}

fn num(v: &Value, digits: usize) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.digits$}"),
        None => "-".to_owned(),
    }
}

fn int(v: &Value) -> String {
    v.as_u64().map_or_else(|| "-".to_owned(), |x| x.to_string())
}

fn ingest_section(md: &mut String, doc: &Value) -> anyhow::Result<()> {
    writeln!(md, "## Ingest\n")?;
    writeln!(md, "| field | value |")?;
    writeln!(md, "|---|---|")?;
    writeln!(md, "| rows total | {} |", int(&doc["rows_total"]))?;
    writeln!(md, "| rows kept | {} |", int(&doc["rows_kept"]))?;
    writeln!(md, "| rows rejected | {} |", int(&doc["rows_rejected"]))?;
    let r = &doc["rejections"];
    for key in [
        "missing_origin",
        "missing_destination",
        "fare_zero",
        "fare_excessive",
        "zero_duration",
        "zero_miles",
        "unparseable",
    ] {
        writeln!(md, "| rejected: {key} | {} |", int(&r[key]))?;
    }
    writeln!(md, "| out of window | {} |", int(&doc["out_of_window"]))?;
    writeln!(md, "| unknown area | {} |", int(&doc["unknown_area"]))?;
    writeln!(md, "| truly shared ratio | {} |", num(&doc["truly_shared_ratio"], 3))?;
    writeln!(md)?;
    Ok(())
}

fn sdi_section(md: &mut String, doc: &Value) -> anyhow::Result<()> {
    let model = &doc["model"];
    writeln!(md, "## Social disadvantage index\n")?;
    writeln!(
        md,
        "Cronbach's alpha {}, {} iterations, converged: {}.\n",
        num(&model["alpha"], 4),
        int(&model["iterations"]),
        model["converged"].as_bool().unwrap_or(false)
    )?;
    writeln!(md, "| item | loading | uniqueness |")?;
    writeln!(md, "|---|---|---|")?;
    let names = model["item_names"].as_array().cloned().unwrap_or_default();
    let loadings = model["loadings"].as_array().cloned().unwrap_or_default();
    let uniq = model["uniquenesses"].as_array().cloned().unwrap_or_default();
    let flagged: Vec<&str> = model["flagged"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    for i in 0..names.len() {
        let name = names[i].as_str().unwrap_or("-");
        let mark = if flagged.contains(&name) { " (weak)" } else { "" };
        writeln!(
            md,
            "| {name}{mark} | {} | {} |",
            num(&loadings[i], 3),
            num(&uniq[i], 3)
        )?;
    }
    writeln!(md)?;
    Ok(())
}

fn tat_section(md: &mut String, tat_csv: &str) -> anyhow::Result<()> {
    writeln!(md, "## Transit access time\n")?;
    writeln!(md, "| area | minutes |")?;
    writeln!(md, "|---|---|")?;
    for line in tat_csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
    {
        let Some((area, minutes)) = line.split_once(',') else {
            continue;
        };
        let minutes: f64 = minutes.parse().unwrap_or(f64::NAN);
        writeln!(md, "| {area} | {minutes:.2} |")?;
    }
    writeln!(md)?;
    Ok(())
}

fn coefficient_rows(md: &mut String, entries: &Value) -> anyhow::Result<()> {
    for c in entries.as_array().cloned().unwrap_or_default() {
        let p = c["p"].as_f64().unwrap_or(f64::NAN);
        writeln!(
            md,
            "| {} | {} | {} | {} | {}{} |",
            c["name"].as_str().unwrap_or("-"),
            num(&c["value"], 4),
            num(&c["std_error"], 4),
            num(&c["z"], 2),
            num(&c["p"], 4),
            significance_stars(p),
        )?;
    }
    Ok(())
}

fn fit_section(md: &mut String, doc: &Value) -> anyhow::Result<()> {
    let dep = doc["dependent"].as_str().unwrap_or("-");
    writeln!(md, "## Model: {dep}\n")?;
    if let Some(err) = doc.get("error") {
        writeln!(
            md,
            "This model failed: {} (class: {}).\n",
            err["message"].as_str().unwrap_or("-"),
            err["class"].as_str().unwrap_or("-")
        )?;
        return Ok(());
    }

    let excluded: Vec<&str> = doc["excluded_areas"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    writeln!(
        md,
        "{} of {} areas used{}.\n",
        int(&doc["n_used"]),
        int(&doc["n_areas"]),
        if excluded.is_empty() {
            String::new()
        } else {
            format!(" (excluded: {})", excluded.join(", "))
        }
    )?;

    writeln!(md, "### Diagnostics\n")?;
    writeln!(md, "| test | statistic | p |")?;
    writeln!(md, "|---|---|---|")?;
    let d = &doc["diagnostics"];
    for (label, key) in [
        ("Moran's I (OLS residuals)", "moran_ols_residuals"),
        ("LM lag", "lm_lag"),
        ("LM error", "lm_error"),
        ("Moran's I (SDM residuals)", "moran_sdm_residuals"),
    ] {
        let t = &d[key];
        let p = t["p_value"].as_f64().unwrap_or(f64::NAN);
        writeln!(
            md,
            "| {label} | {} | {}{} |",
            num(&t["statistic"], 5),
            num(&t["p_value"], 4),
            significance_stars(p),
        )?;
    }
    let sel = &doc["selection"];
    writeln!(
        md,
        "\nSelection at alpha {}: **{}**{}.\n",
        num(&sel["alpha"], 2),
        sel["choice"].as_str().unwrap_or("-"),
        sel["warning"]
            .as_str()
            .map_or(String::new(), |w| format!(" ({w})"))
    )?;

    let sdm = &doc["sdm"];
    writeln!(md, "### Spatial Durbin fit\n")?;
    writeln!(md, "| term | value | std. error | z | p |")?;
    writeln!(md, "|---|---|---|---|---|")?;
    coefficient_rows(md, &sdm["beta"])?;
    for c in sdm["gamma"].as_array().cloned().unwrap_or_default() {
        let p = c["p"].as_f64().unwrap_or(f64::NAN);
        writeln!(
            md,
            "| W:{} | {} | {} | {} | {}{} |",
            c["name"].as_str().unwrap_or("-"),
            num(&c["value"], 4),
            num(&c["std_error"], 4),
            num(&c["z"], 2),
            num(&c["p"], 4),
            significance_stars(p),
        )?;
    }
    coefficient_rows(md, &Value::Array(vec![sdm["rho"].clone()]))?;
    writeln!(
        md,
        "\nsigma2 {}, loglik {}, AIC {} (OLS AIC {}), Nagelkerke pseudo-r2 {}.\n",
        num(&sdm["sigma2"], 4),
        num(&sdm["loglik"], 3),
        num(&sdm["aic"], 3),
        num(&doc["ols"]["aic"], 3),
        num(&sdm["pseudo_r2_nagelkerke"], 4),
    )?;

    writeln!(md, "### Impacts (simulation inference)\n")?;
    writeln!(md, "| covariate | direct | indirect | total |")?;
    writeln!(md, "|---|---|---|---|")?;
    for row in doc["impacts"]["exact"]["rows"].as_array().cloned().unwrap_or_default() {
        let cell = |m: &Value| {
            let p = m["p"].as_f64().unwrap_or(f64::NAN);
            format!("{}{}", num(&m["value"], 4), significance_stars(p))
        };
        writeln!(
            md,
            "| {} | {} | {} | {} |",
            row["name"].as_str().unwrap_or("-"),
            cell(&row["direct"]),
            cell(&row["indirect"]),
            cell(&row["total"]),
        )?;
    }
    writeln!(md)?;
    Ok(())
}

fn scenario_section(md: &mut String, doc: &Value) -> anyhow::Result<()> {
    writeln!(md, "## Scenarios\n")?;
    writeln!(md, "| scenario | model | covariate | measure | delta_x | delta rides | elasticity (%) |")?;
    writeln!(md, "|---|---|---|---|---|---|---|")?;
    for r in doc["results"].as_array().cloned().unwrap_or_default() {
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r["name"].as_str().unwrap_or("-"),
            r["model"].as_str().unwrap_or("-"),
            r["covariate"].as_str().unwrap_or("-"),
            r["measure"].as_str().unwrap_or("-"),
            num(&r["delta_x"], 4),
            num(&r["delta_rides"], 1),
            num(&r["elasticity_pct"], 3),
        )?;
    }
    writeln!(md)?;
    Ok(())
}
