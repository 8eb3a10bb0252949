//! Run configuration: one TOML file plus command-line overrides, flags win.
//! Paths inside the file resolve relative to the file's own directory;
//! paths given on the command line resolve relative to the working
//! directory as usual.

use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use clap::Args;
use geodemand_core::geo::Contiguity;
use geodemand_core::ingest::{ColumnMap, Window};
use serde::Deserialize;

use crate::io;

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration TOML file.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Override the top-level random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Override the Moran permutation count.
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Override the Monte Carlo draw count for impact inference.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    /// Override the hex tessellation edge length in feet.
    #[arg(long)]
    pub hex_edge_ft: Option<f64>,
    /// Override the walking speed in feet per minute.
    #[arg(long)]
    pub walking_speed_ftpm: Option<f64>,
    /// Override the walking detour multiplier.
    #[arg(long)]
    pub detour: Option<f64>,
    /// Override the diagnostic significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the window start date (YYYY-MM-DD).
    #[arg(long, value_name = "DATE")]
    pub window_start: Option<String>,
    /// Override the window end date (YYYY-MM-DD).
    #[arg(long, value_name = "DATE")]
    pub window_end: Option<String>,
    /// Scenario definition file (scenario subcommand).
    #[arg(long, value_name = "FILE")]
    pub scenarios: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    paths: RawPaths,
    window: RawWindow,
    #[serde(default)]
    spatial: RawSpatial,
    #[serde(default)]
    tat: RawTat,
    #[serde(default)]
    model: RawModel,
    columns: Option<ColumnMap>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    region: PathBuf,
    trips: PathBuf,
    stations: PathBuf,
    acs_items: PathBuf,
    covariates: PathBuf,
    scenarios: Option<PathBuf>,
    output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    start: String,
    end: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSpatial {
    contiguity: Option<Contiguity>,
    contiguity_tol_ft: Option<f64>,
    hex_edge_ft: Option<f64>,
    permutations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTat {
    walking_speed_ftpm: Option<f64>,
    detour: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawModel {
    covariates: Option<Vec<String>>,
    lagged: Option<Vec<String>>,
    mc_draws: Option<usize>,
    alpha: Option<f64>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub region: PathBuf,
    pub trips: PathBuf,
    pub stations: PathBuf,
    pub acs_items: PathBuf,
    pub covariates: PathBuf,
    pub scenarios: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub window: Window,
    pub contiguity: Contiguity,
    pub contiguity_tol_ft: f64,
    pub hex_edge_ft: f64,
    pub permutations: usize,
    pub walking_speed_ftpm: f64,
    pub detour: f64,
    pub model_covariates: Vec<String>,
    pub lagged: Vec<String>,
    pub mc_draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub columns: ColumnMap,
}

fn default_model_covariates() -> Vec<String> {
    [
        "pct_18_34",
        "pop_density_per_100k_sq_mi",
        "mean_household_size",
        "bar_restaurant_density_per_1k_sq_mi",
        "tat_minutes",
        "sdi_score",
    ]
    .map(str::to_owned)
    .to_vec()
}

fn parse_date(raw: &str, what: &str) -> anyhow::Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|e| geodemand_core::Error::InvalidInput(format!("{what} `{raw}`: {e}")).into())
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(args: &CommonArgs) -> anyhow::Result<RunConfig> {
        let text = io::read_to_string(&args.config)?;
        let raw: RawConfig = toml::from_str(&text)
            .with_context(|| format!("parsing {}", args.config.display()))?;
        let base = args
            .config
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);

        let start_raw = args.window_start.clone().unwrap_or(raw.window.start);
        let end_raw = args.window_end.clone().unwrap_or(raw.window.end);
        let window = Window::new(
            parse_date(&start_raw, "window start")?,
            parse_date(&end_raw, "window end")?,
        )?;

        let cfg = RunConfig {
            region: resolve(&base, raw.paths.region),
            trips: resolve(&base, raw.paths.trips),
            stations: resolve(&base, raw.paths.stations),
            acs_items: resolve(&base, raw.paths.acs_items),
            covariates: resolve(&base, raw.paths.covariates),
            scenarios: args
                .scenarios
                .clone()
                .or_else(|| raw.paths.scenarios.map(|p| resolve(&base, p))),
            output_dir: args
                .output_dir
                .clone()
                .unwrap_or_else(|| resolve(&base, raw.paths.output_dir)),
            window,
            contiguity: raw.spatial.contiguity.unwrap_or(Contiguity::Queen),
            contiguity_tol_ft: raw.spatial.contiguity_tol_ft.unwrap_or(10.0),
            hex_edge_ft: args.hex_edge_ft.or(raw.spatial.hex_edge_ft).unwrap_or(1750.0),
            permutations: args.permutations.or(raw.spatial.permutations).unwrap_or(999),
            walking_speed_ftpm: args
                .walking_speed_ftpm
                .or(raw.tat.walking_speed_ftpm)
                .unwrap_or(geodemand_core::tat::DEFAULT_WALKING_SPEED_FTPM),
            detour: args.detour.or(raw.tat.detour).unwrap_or(1.0),
            model_covariates: raw.model.covariates.unwrap_or_else(default_model_covariates),
            lagged: raw
                .model
                .lagged
                .unwrap_or_else(|| vec!["tat_minutes".to_owned()]),
            mc_draws: args.mc_draws.or(raw.model.mc_draws).unwrap_or(500),
            alpha: args.alpha.or(raw.model.alpha).unwrap_or(0.05),
            seed: args.seed.or(raw.seed).unwrap_or(42),
            columns: raw.columns.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        use geodemand_core::Error;
        if !(self.hex_edge_ft > 0.0) {
            return Err(Error::InvalidInput(format!(
                "hex_edge_ft must be positive, got {}",
                self.hex_edge_ft
            ))
            .into());
        }
        if !(self.walking_speed_ftpm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "walking_speed_ftpm must be positive, got {}",
                self.walking_speed_ftpm
            ))
            .into());
        }
        if !(self.detour >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "detour multiplier must be at least 1, got {}",
                self.detour
            ))
            .into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            ))
            .into());
        }
        if self.model_covariates.is_empty() {
            return Err(Error::InvalidInput("model.covariates must not be empty".into()).into());
        }
        Ok(())
    }

    /// Speed actually used for hex access times; the detour multiplier
    /// stretches every straight-line distance by the same factor.
    pub fn effective_walking_speed(&self) -> f64 {
        self.walking_speed_ftpm / self.detour
    }

    /// Check inputs up front so a missing file fails before any work.
    pub fn require_inputs(&self, paths: &[&Path]) -> anyhow::Result<()> {
        for p in paths {
            if !p.exists() {
                return Err(anyhow::Error::new(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("input not found: {}", p.display()),
                )));
            }
        }
        Ok(())
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn window_key(&self) -> String {
        format!("{}..{}", self.window.start, self.window.end)
    }

    /// Stage hashes tie each output to the configuration subset that shaped
    /// it, including the content of the input files it was derived from.
    pub fn stage_hash_ingest(&self) -> anyhow::Result<String> {
        Ok(io::stage_hash(&[
            ("region", io::file_sha256(&self.region)?),
            ("trips", io::file_sha256(&self.trips)?),
            ("window", self.window_key()),
            ("columns", serde_json::to_string(&self.columns)?),
        ]))
    }

    pub fn stage_hash_sdi(&self) -> anyhow::Result<String> {
        Ok(io::stage_hash(&[
            ("region", io::file_sha256(&self.region)?),
            ("acs_items", io::file_sha256(&self.acs_items)?),
        ]))
    }

    pub fn stage_hash_tat(&self) -> anyhow::Result<String> {
        Ok(io::stage_hash(&[
            ("region", io::file_sha256(&self.region)?),
            ("stations", io::file_sha256(&self.stations)?),
            ("hex_edge_ft", self.hex_edge_ft.to_string()),
            ("walking_speed_ftpm", self.walking_speed_ftpm.to_string()),
            ("detour", self.detour.to_string()),
        ]))
    }

    pub fn stage_hash_fit(&self) -> anyhow::Result<String> {
        Ok(io::stage_hash(&[
            ("region", io::file_sha256(&self.region)?),
            ("covariates", io::file_sha256(&self.covariates)?),
            ("ingest", self.stage_hash_ingest()?),
            ("sdi", self.stage_hash_sdi()?),
            ("tat", self.stage_hash_tat()?),
            ("contiguity", serde_json::to_string(&self.contiguity)?),
            ("contiguity_tol_ft", self.contiguity_tol_ft.to_string()),
            ("model_covariates", self.model_covariates.join(",")),
            ("lagged", self.lagged.join(",")),
            ("permutations", self.permutations.to_string()),
            ("mc_draws", self.mc_draws.to_string()),
            ("alpha", self.alpha.to_string()),
            ("seed", self.seed.to_string()),
        ]))
    }

    pub fn stage_hash_scenario(&self) -> anyhow::Result<String> {
        let scenarios = self.scenarios.as_deref().ok_or_else(|| {
            geodemand_core::Error::InvalidInput(
                "no scenario file: set paths.scenarios or pass --scenarios".into(),
            )
        })?;
        Ok(io::stage_hash(&[
            ("fit", self.stage_hash_fit()?),
            ("scenarios", io::file_sha256(scenarios)?),
        ]))
    }
}
