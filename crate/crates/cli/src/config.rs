use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use vesseltrack::synth::SynthParams;
use vesseltrack::TrackerConfig;

/// Contents of a run configuration file: every tracker setting at top level,
/// plus run locations and an optional `[synth]` table.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub tracker: TrackerConfig,
    pub stride: Option<usize>,
    pub seq: Option<PathBuf>,
    pub ann: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub field_dir: Option<PathBuf>,
    pub mask_dir: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub synth: Option<SynthParams>,
}

const RUN_KEYS: [&str; 9] = ["stride", "seq", "ann", "out", "field_dir", "mask_dir", "pred", "gt", "synth"];

/// Top-level keys a configuration may contain.
fn known_keys() -> Vec<String> {
    let tracker = toml::Table::try_from(TrackerConfig::default()).expect("tracker config serializes");
    let mut keys: Vec<String> = tracker.keys().cloned().collect();
    // Optional tracker settings are absent from the serialized defaults.
    keys.push("ridge_threshold".into());
    keys.extend(RUN_KEYS.iter().map(|k| k.to_string()));
    keys
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses a configuration text. Each top-level entry is checked on its own
/// first so that unknown keys and type mismatches report their line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries: BTreeMap<String, toml::Spanned<toml::Value>> = toml::from_str(text)?;
    let known = known_keys();
    for (key, value) in &entries {
        if !known.contains(key) {
            bail!("line {}: unknown key `{key}`", line_of(text, value.span().start));
        }
        let mut single = toml::Table::new();
        single.insert(key.clone(), value.get_ref().clone());
        if let Err(e) = RunConfig::deserialize(toml::Value::Table(single)) {
            bail!("line {}: key `{key}`: {e}", line_of(text, value.span().start));
        }
    }
    let table: toml::Table = entries.into_iter().map(|(k, v)| (k, v.into_inner())).collect();
    let cfg = RunConfig::deserialize(toml::Value::Table(table))?;
    cfg.tracker.validate()?;
    if let Some(s) = &cfg.synth {
        s.validate()?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}
