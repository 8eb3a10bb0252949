//! Output provenance: every file this tool writes starts with (or embeds) a
//! meta record carrying the tool version, the stage's config hash, and the
//! seed. Downstream commands re-derive the expected hash from the current
//! configuration and refuse inputs whose embedded hash differs.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "geodemand";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance stamped into one output file.
#[derive(Debug, Clone)]
pub struct Meta {
    pub stage: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    /// Leading comment line for CSV outputs. Readers in the core crate skip
    /// `#` lines, so the stamp survives a round trip.
    pub fn comment_line(&self) -> String {
        format!(
            "# {TOOL} v{VERSION} stage={} config={} seed={}",
            self.stage, self.config_hash, self.seed
        )
    }

    /// `meta` object for JSON outputs.
    pub fn json(&self) -> Value {
        json!({
            "tool": TOOL,
            "version": VERSION,
            "schema_version": SCHEMA_VERSION,
            "stage": self.stage,
            "config_hash": self.config_hash,
            "seed": self.seed,
        })
    }
}

/// Meta recovered from a previously written output.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedMeta {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
}

/// A consumed file was produced under a different configuration than the
/// current run would produce. Classified as a data error (exit 3).
#[derive(Debug)]
pub struct Stale(pub String);

impl fmt::Display for Stale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stale input: {}", self.0)
    }
}

impl std::error::Error for Stale {}

pub fn sha256_hex16(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex16(&bytes))
}

/// Hash of a stage's configuration subset. Keys are hashed in the order
/// given; callers keep that order fixed.
pub fn stage_hash(pairs: &[(&str, String)]) -> String {
    let mut material = String::new();
    for (k, v) in pairs {
        material.push_str(k);
        material.push('=');
        material.push_str(v);
        material.push('\n');
    }
    sha256_hex16(material.as_bytes())
}

pub fn read_to_string(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with a trailing newline; key order comes from struct/map
/// order, which is deterministic.
pub fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Parse the `# geodemand ...` comment stamp off the first line of a CSV.
pub fn parse_comment_meta(content: &str) -> Option<EmbeddedMeta> {
    let first = content.lines().next()?;
    let rest = first.strip_prefix(&format!("# {TOOL} v"))?;
    let mut stage = None;
    let mut config = None;
    let mut seed = None;
    for token in rest.split_whitespace().skip(1) {
        if let Some(v) = token.strip_prefix("stage=") {
            stage = Some(v.to_owned());
        } else if let Some(v) = token.strip_prefix("config=") {
            config = Some(v.to_owned());
        } else if let Some(v) = token.strip_prefix("seed=") {
            seed = v.parse().ok();
        }
    }
    Some(EmbeddedMeta {
        stage: stage?,
        config_hash: config?,
        seed: seed?,
    })
}

pub fn parse_json_meta(value: &Value) -> Option<EmbeddedMeta> {
    let meta = value.get("meta")?;
    Some(EmbeddedMeta {
        stage: meta.get("stage")?.as_str()?.to_owned(),
        config_hash: meta.get("config_hash")?.as_str()?.to_owned(),
        seed: meta.get("seed")?.as_u64()?,
    })
}

/// Read a prior stage's CSV output and verify its embedded config hash
/// against what the current configuration demands.
pub fn require_fresh_csv(path: &Path, stage: &str, expected_hash: &str) -> anyhow::Result<String> {
    let content = read_to_string(path)?;
    let meta = parse_comment_meta(&content).ok_or_else(|| {
        Stale(format!(
            "{} carries no provenance stamp; rerun `{TOOL} {stage}`",
            path.display()
        ))
    })?;
    check_meta(path, stage, expected_hash, &meta)?;
    Ok(content)
}

/// Same check for JSON outputs; returns the parsed document.
pub fn require_fresh_json(path: &Path, stage: &str, expected_hash: &str) -> anyhow::Result<Value> {
    let content = read_to_string(path)?;
    let value: Value =
        serde_json::from_str(&content).with_context(|| format!("parsing {}", path.display()))?;
    let meta = parse_json_meta(&value).ok_or_else(|| {
        Stale(format!(
            "{} carries no provenance stamp; rerun `{TOOL} {stage}`",
            path.display()
        ))
    })?;
    check_meta(path, stage, expected_hash, &meta)?;
    Ok(value)
}

fn check_meta(path: &Path, stage: &str, expected_hash: &str, meta: &EmbeddedMeta) -> anyhow::Result<()> {
    if meta.stage != stage {
        return Err(Stale(format!(
            "{} was written by stage `{}`, expected `{stage}`",
            path.display(),
            meta.stage
        ))
        .into());
    }
    if meta.config_hash != expected_hash {
        return Err(Stale(format!(
            "{} was produced under config {} but the current config hashes to {expected_hash}; rerun `{TOOL} {stage}`",
            path.display(),
            meta.config_hash
        ))
        .into());
    }
    Ok(())
}

/// JSON number or null for non-finite values.
pub fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}
