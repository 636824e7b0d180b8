//! Run configuration: one TOML file describing inputs and every stage.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adequacy::AdequacyConfig;
use crate::error::{Error, Result};
use crate::fleet::{load_fleet, load_series, Fleet, HourlySeries, ProfileMap, SeriesKind};
use crate::gep::{GepConfig, SolverConfig};
use crate::sampler::SamplerConfig;
use crate::sweep::{RelaxationConfig, SweepConfig};
use crate::wodt::WodtConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every stochastic step (sampling, tree restarts, Monte Carlo).
    #[serde(default)]
    pub seed: u64,
    pub fleet: PathBuf,
    pub load: PathBuf,
    /// Capacity-factor series keyed by the profile name used in the fleet.
    #[serde(default)]
    pub profiles: BTreeMap<String, PathBuf>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Relative tolerance for "old type kept at its initial count".
    #[serde(default = "default_partition_tolerance")]
    pub partition_tolerance: f64,
    #[serde(default)]
    pub relaxation: RelaxationConfig,
    #[serde(default)]
    pub adequacy: AdequacyConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub wodt: WodtConfig,
    #[serde(default = "default_min_accuracy")]
    pub min_train_accuracy: f64,
    pub gep: GepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_partition_tolerance() -> f64 {
    0.01
}

fn default_min_accuracy() -> f64 {
    0.999
}

impl RunConfig {
    /// Parses `text`, applying `key=value` overrides (dotted keys) first.
    pub fn parse(text: &str, origin: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let parse_err = |e: toml::de::Error| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            Error::Parse {
                path: origin.into(),
                location,
                message: e.message().to_string(),
            }
        };
        let mut doc: toml::Table = text.parse().map_err(parse_err)?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse {
                path: origin.into(),
                location: "document".into(),
                message: e.message().to_string(),
            })?;
        cfg.sweep.lolh_threshold = cfg.adequacy.lolh_threshold;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text, path, overrides)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        self.relaxation.validate()?;
        self.adequacy.validate()?;
        if !(0.0..=1.0).contains(&self.min_train_accuracy) {
            return Err(Error::invariant("min_train_accuracy", "must lie in [0, 1]"));
        }
        if !(self.partition_tolerance >= 0.0) {
            return Err(Error::invariant("partition_tolerance", "must be nonnegative"));
        }
        if self.wodt.max_depth == 0 {
            return Err(Error::invariant("wodt.max_depth", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parses a `key=value` override; the value is read as TOML, else as a string.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config(format!("override `{arg}` is not of the form key=value"))),
    }
}

fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Fleet, base load and profiles referenced by a run configuration.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub fleet: Fleet,
    pub load: HourlySeries,
    pub profiles: ProfileMap,
}

impl Inputs {
    pub fn load(cfg: &RunConfig, base: &Path) -> Result<Self> {
        let fleet = load_fleet(base.join(&cfg.fleet))?;
        let load = load_series(base.join(&cfg.load), SeriesKind::LoadMw)?;
        let mut profiles = ProfileMap::new();
        for (name, path) in &cfg.profiles {
            let mut s = load_series(base.join(path), SeriesKind::CapacityFactor)?;
            s.name = name.clone();
            if s.len() != load.len() {
                return Err(Error::LengthMismatch {
                    what: format!("profile `{name}`"),
                    expected: load.len(),
                    found: s.len(),
                });
            }
            profiles.insert(name.clone(), s);
        }
        for g in fleet.iter().filter(|g| g.is_renewable) {
            let key = g.profile_ref.clone().unwrap_or_default();
            if !profiles.contains_key(&key) {
                return Err(Error::MissingProfile {
                    name: g.name.clone(),
                    profile: key,
                });
            }
        }
        Ok(Self { fleet, load, profiles })
    }
}
