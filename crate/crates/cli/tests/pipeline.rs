//! End-to-end behavior of the `geodemand` binary on the bundled fixture:
//! stage wiring, exit codes, freshness refusal, and per-model failure
//! isolation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use geodemand_core::econometrics::{lm_error_test, lm_lag_test, ols_fit, select_model, ModelChoice};
use geodemand_core::geo::load_region;
use geodemand_core::rng::stream;
use geodemand_core::simulate::{simulate_sdm, standard_normal_matrix};
use geodemand_core::weights::build_weights;
use nalgebra::DMatrix;
use serde_json::Value;

const FIXTURE_FILES: [&str; 7] = [
    "region.geojson",
    "trips.csv",
    "stations.csv",
    "acs_items.csv",
    "covariates.csv",
    "config.toml",
    "scenarios.json",
];

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/minicity")
}

/// Copy the fixture into its own directory so a test can mutate inputs.
fn copy_fixture(dst: &Path) {
    let src = fixture_dir();
    for name in FIXTURE_FILES {
        fs::copy(src.join(name), dst.join(name)).unwrap();
    }
}

fn run_stage(config: &Path, out_dir: &Path, stage: &str, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodemand"))
        .arg(stage)
        .arg("--config")
        .arg(config)
        .arg("--output-dir")
        .arg(out_dir)
        .args(extra)
        .output()
        .unwrap()
}

fn assert_ok(out: &Output, stage: &str) {
    assert!(
        out.status.success(),
        "{stage} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixture_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let config = dir.path().join("config.toml");
    let out = dir.path().join("out");

    let clock = Instant::now();
    assert_ok(&run_stage(&config, &out, "ingest", &[]), "ingest");
    assert!(clock.elapsed().as_secs_f64() < 5.0, "ingest too slow");
    for stage in ["sdi", "tat", "fit", "scenario", "report"] {
        assert_ok(&run_stage(&config, &out, stage, &[]), stage);
    }

    // Demand: one row per area plus the provenance and window comments.
    let demand = fs::read_to_string(out.join("demand.csv")).unwrap();
    let data_rows = demand.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data_rows, 12);

    let rejections = read_json(&out.join("rejections.json"));
    assert_eq!(rejections["rows_total"].as_u64().unwrap(), 9_972);
    assert_eq!(
        rejections["rows_kept"].as_u64().unwrap() + rejections["rows_rejected"].as_u64().unwrap(),
        9_972
    );

    // The fixture's generating process uses rho = 0.5 for both dependents.
    for (dep, want_choice) in [("solo", "sdm"), ("authorized_pooled", "ols")] {
        let fit = read_json(&out.join(format!("fit_{dep}.json")));
        let rho = fit["sdm"]["rho"]["value"].as_f64().unwrap();
        assert!((0.45..=0.55).contains(&rho), "{dep} rho {rho}");
        assert_eq!(fit["selection"]["choice"].as_str().unwrap(), want_choice);
    }

    let scenarios = read_json(&out.join("scenarios_report.json"));
    let results = scenarios["results"].as_array().unwrap();
    assert_eq!(results.len(), 4);
    let zero = results
        .iter()
        .find(|r| r["name"] == "zero_delta_is_zero_rides")
        .unwrap();
    assert_eq!(zero["delta_rides"].as_f64().unwrap(), 0.0);

    let report = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.contains("rho") || report.contains("ρ"));
}

#[test]
fn empty_trips_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let trips = dir.path().join("trips.csv");
    let header = fs::read_to_string(&trips).unwrap().lines().next().unwrap().to_owned();
    fs::write(&trips, format!("{header}\n")).unwrap();

    let out = run_stage(&dir.path().join("config.toml"), &dir.path().join("out"), "ingest", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no rows survived"));
}

#[test]
fn stale_upstream_output_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let config = dir.path().join("config.toml");
    let out_dir = dir.path().join("out");
    assert_ok(&run_stage(&config, &out_dir, "ingest", &[]), "ingest");
    assert_ok(&run_stage(&config, &out_dir, "sdi", &[]), "sdi");
    assert_ok(&run_stage(&config, &out_dir, "tat", &[]), "tat");

    // New trips arrive after ingest ran: fit must refuse the old demand file.
    let trips = dir.path().join("trips.csv");
    let mut text = fs::read_to_string(&trips).unwrap();
    text.push_str("2019-03-02 09:00:00,600,2.0,3,4,8.25,false,1\n");
    fs::write(&trips, text).unwrap();

    let out = run_stage(&config, &out_dir, "fit", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stale"));
}

#[test]
fn scenario_validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let config = dir.path().join("config.toml");
    let out_dir = dir.path().join("out");
    for stage in ["ingest", "sdi", "tat", "fit"] {
        assert_ok(&run_stage(&config, &out_dir, stage, &[]), stage);
    }

    let bad = |name: &str, body: &str| -> Output {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        run_stage(&config, &out_dir, "scenario", &["--scenarios", path.to_str().unwrap()])
    };

    let negative = bad(
        "negative.json",
        r#"{"scenarios":[{"name":"bad","model":"solo","covariate":"tat_minutes",
            "measure":"total","delta_x":1.0,"baseline_rides":-5.0}]}"#,
    );
    assert_eq!(negative.status.code(), Some(2), "negative baseline must be rejected");

    let unknown = bad(
        "unknown.json",
        r#"{"scenarios":[{"name":"bad","model":"solo","covariate":"no_such_column",
            "measure":"total","delta_x":1.0}]}"#,
    );
    assert_eq!(unknown.status.code(), Some(2), "unknown covariate must be rejected");
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("no_such_column"));
}

#[test]
fn corrupting_one_dependent_fails_only_that_model() {
    let dir = tempfile::tempdir().unwrap();
    copy_fixture(dir.path());
    let config = dir.path().join("config.toml");
    let out_dir = dir.path().join("out");
    for stage in ["ingest", "sdi", "tat"] {
        assert_ok(&run_stage(&config, &out_dir, stage, &[]), stage);
    }

    // Zero out the solo column; its log-demand rows all drop while the
    // pooled column is untouched. Comment lines keep the provenance stamp.
    let demand_path = out_dir.join("demand.csv");
    let rewritten: String = fs::read_to_string(&demand_path)
        .unwrap()
        .lines()
        .map(|line| {
            if line.starts_with('#') || line.starts_with("area_id") {
                line.to_owned()
            } else {
                let mut parts: Vec<&str> = line.split(',').collect();
                parts[1] = "0";
                parts.join(",")
            }
        })
        .fold(String::new(), |mut acc, l| {
            acc.push_str(&l);
            acc.push('\n');
            acc
        });
    fs::write(&demand_path, rewritten).unwrap();

    let out = run_stage(&config, &out_dir, "fit", &[]);
    assert!(!out.status.success());

    let solo = read_json(&out_dir.join("fit_solo.json"));
    assert!(solo.get("error").is_some(), "solo fit should have failed");
    let pooled = read_json(&out_dir.join("fit_authorized_pooled.json"));
    assert!(pooled["sdm"]["rho"]["value"].is_f64(), "pooled fit should have succeeded");
}

#[test]
fn no_spatial_signal_recommends_ols() {
    let region = load_region(&fs::read(fixture_dir().join("region.geojson")).unwrap()).unwrap();
    let adjacency = geodemand_core::geo::queen_adjacency(&region, 10.0).unwrap();
    let w = build_weights(&adjacency).unwrap();
    let n = region.len();
    let beta = [1.0, 0.6, -0.4];

    let mut ols_votes = 0;
    for seed in 0..20 {
        let mut rng = stream(17, seed);
        let x = standard_normal_matrix(n, 2, &mut rng);
        let y = simulate_sdm(&w, &x, &[], &beta, 0.0, 0.5, &mut rng).unwrap();
        let z = {
            let mut z = DMatrix::from_element(n, 3, 1.0);
            z.view_mut((0, 1), (n, 2)).copy_from(&x);
            z
        };
        let ols = ols_fit(&y, &z).unwrap();
        let lag = lm_lag_test(&ols, &w, &y, &z).unwrap();
        let err = lm_error_test(&ols, &w).unwrap();
        if select_model(&lag, &err, 0.05) == ModelChoice::Ols {
            ols_votes += 1;
        }
    }
    assert!(ols_votes >= 18, "OLS recommended only {ols_votes}/20 times");
}
