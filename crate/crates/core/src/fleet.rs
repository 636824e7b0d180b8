//! Generator fleets, hourly series and generation mixes.
//!
//! A fleet is declared in a TOML file with one `[[generator]]` block per
//! clustered technology. Hourly series (load or capacity factors) are
//! headerless single-column CSV files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of hours in a simulated year.
pub const HOURS_PER_YEAR: usize = 8760;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    /// Candidate technology that can be built.
    New,
    /// Existing units that can only be retired.
    Old,
}

/// One clustered generator technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorType {
    pub name: String,
    pub category: Category,
    pub unit_capacity_mw: f64,
    #[serde(alias = "FOR")]
    pub forced_outage_rate: f64,
    #[serde(default)]
    pub is_renewable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_ref: Option<String>,
    /// Currency per unit built.
    pub capital_cost: f64,
    /// Currency per unit-year in operation.
    pub fixed_om_cost: f64,
    /// Currency per MWh.
    pub variable_cost: f64,
    /// Tonnes of CO2 per MWh.
    pub co2_rate: f64,
    #[serde(default)]
    pub initial_units: u32,
    /// Last planning year in which old units may operate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime_expiry_year: Option<usize>,
}

impl GeneratorType {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("{}.{}", self.name, f);
        if self.name.trim().is_empty() {
            return Err(Error::invariant("name", "generator name must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.forced_outage_rate) {
            return Err(Error::invariant(
                field("forced_outage_rate"),
                format!("{} is outside [0, 1]", self.forced_outage_rate),
            ));
        }
        if !(self.unit_capacity_mw.is_finite() && self.unit_capacity_mw > 0.0) {
            return Err(Error::invariant(
                field("unit_capacity_mw"),
                format!("{} must be positive", self.unit_capacity_mw),
            ));
        }
        if self.category == Category::New && self.initial_units != 0 {
            return Err(Error::invariant(
                field("initial_units"),
                "new technologies start with zero units",
            ));
        }
        if self.is_renewable && self.profile_ref.is_none() {
            return Err(Error::invariant(
                field("profile_ref"),
                "renewable types need a capacity-factor profile",
            ));
        }
        for (name, v) in [
            ("capital_cost", self.capital_cost),
            ("fixed_om_cost", self.fixed_om_cost),
            ("variable_cost", self.variable_cost),
            ("co2_rate", self.co2_rate),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invariant(
                    field(name),
                    format!("{v} must be finite and nonnegative"),
                ));
            }
        }
        Ok(())
    }
}

/// A validated collection of generator types with unique names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fleet {
    types: Vec<GeneratorType>,
    index: IndexMap<String, usize>,
}

impl Fleet {
    pub fn new(types: Vec<GeneratorType>) -> Result<Self> {
        let mut index = IndexMap::with_capacity(types.len());
        for (i, t) in types.iter().enumerate() {
            t.validate()?;
            if index.insert(t.name.clone(), i).is_some() {
                return Err(Error::DuplicateName(t.name.clone()));
            }
        }
        Ok(Self { types, index })
    }

    pub fn types(&self) -> &[GeneratorType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&GeneratorType> {
        self.position(name).map(|i| &self.types[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GeneratorType> {
        self.types.iter()
    }

    /// Unit counts of every existing type before any retirement.
    pub fn initial_counts(&self) -> BTreeMap<String, u32> {
        self.types.iter().map(|t| (t.name.clone(), t.initial_units)).collect()
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            generator: &'a [GeneratorType],
        }
        toml::to_string(&Out { generator: &self.types }).expect("generator types always serialize")
    }
}

impl<'a> IntoIterator for &'a Fleet {
    type Item = &'a GeneratorType;
    type IntoIter = std::slice::Iter<'a, GeneratorType>;

    fn into_iter(self) -> Self::IntoIter {
        self.types.iter()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetFile {
    #[serde(default)]
    generator: Vec<GeneratorType>,
}

/// Parses fleet TOML text. `origin` is only used in error messages.
pub fn parse_fleet(text: &str, origin: &Path) -> Result<Fleet> {
    let file: FleetFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        location: e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or_else(|| "unknown position".into()),
        message: e.message().to_string(),
    })?;
    Fleet::new(file.generator)
}

/// Reads and validates a fleet file.
pub fn load_fleet(path: impl AsRef<Path>) -> Result<Fleet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fleet(&text, path)
}

pub fn save_fleet(fleet: &Fleet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, fleet.to_toml()).map_err(|e| Error::io(path, e))
}

pub(crate) fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("line {line}, column {col}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    LoadMw,
    CapacityFactor,
}

/// An hourly time series of load (MW) or capacity factors.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub name: String,
    pub kind: SeriesKind,
    values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(name: impl Into<String>, kind: SeriesKind, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::invariant(
                format!("{name}.values"),
                "series must hold at least one hour",
            ));
        }
        for (h, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invariant(
                    format!("{name}[{h}]"),
                    format!("non-finite value {v}"),
                ));
            }
            if v < 0.0 {
                return Err(Error::invariant(format!("{name}[{h}]"), format!("negative value {v}")));
            }
            if kind == SeriesKind::CapacityFactor && v > 1.0 {
                return Err(Error::invariant(
                    format!("{name}[{h}]"),
                    format!("capacity factor {v} is outside [0, 1]"),
                ));
            }
        }
        Ok(Self { name, kind, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 8);
        for v in &self.values {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

/// Capacity-factor series keyed by profile name.
pub type ProfileMap = BTreeMap<String, HourlySeries>;

/// Parses a headerless single-column CSV series.
pub fn parse_series(text: &str, name: impl Into<String>, kind: SeriesKind, origin: &Path) -> Result<HourlySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            location: format!("row {}", row + 1),
            message,
        };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != 1 {
            return Err(parse_err(format!("expected 1 column, found {}", record.len())));
        }
        let field = record[0].trim();
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(format!("`{field}` is not a number")))?;
        values.push(v);
    }
    HourlySeries::new(name, kind, values)
}

pub fn load_series(path: impl AsRef<Path>, kind: SeriesKind) -> Result<HourlySeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_series(&text, name, kind, path)
}

/// Planning horizon settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningHorizon {
    pub num_years: usize,
    #[serde(default = "default_growth")]
    pub load_growth_rate: f64,
    #[serde(default)]
    pub base_load_ref: String,
    /// Currency per tonne, one entry per year (empty means no tax).
    #[serde(default)]
    pub carbon_tax_schedule: Vec<f64>,
}

fn default_growth() -> f64 {
    0.014
}

impl PlanningHorizon {
    pub fn new(num_years: usize, load_growth_rate: f64) -> Self {
        Self {
            num_years,
            load_growth_rate,
            base_load_ref: String::new(),
            carbon_tax_schedule: vec![0.0; num_years],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_years == 0 {
            return Err(Error::invariant("horizon.num_years", "must be at least 1"));
        }
        if !(self.load_growth_rate > -1.0) {
            return Err(Error::invariant(
                "horizon.load_growth_rate",
                "growth rate must exceed -1",
            ));
        }
        if !self.carbon_tax_schedule.is_empty() && self.carbon_tax_schedule.len() != self.num_years {
            return Err(Error::LengthMismatch {
                what: "carbon_tax_schedule".into(),
                expected: self.num_years,
                found: self.carbon_tax_schedule.len(),
            });
        }
        Ok(())
    }

    pub fn carbon_tax(&self, year: usize) -> f64 {
        self.carbon_tax_schedule.get(year - 1).copied().unwrap_or(0.0)
    }
}

/// Load series of `year`, grown geometrically from the base year.
pub fn scale_demand(base: &HourlySeries, horizon: &PlanningHorizon, year: usize) -> Result<HourlySeries> {
    if base.kind != SeriesKind::LoadMw {
        return Err(Error::invariant(
            base.name.clone(),
            "demand scaling needs a load series",
        ));
    }
    if year < 1 || year > horizon.num_years {
        return Err(Error::YearOutOfRange {
            year,
            years: horizon.num_years,
        });
    }
    let factor = (1.0 + horizon.load_growth_rate).powi(year as i32 - 1);
    Ok(HourlySeries {
        name: format!("{}@{}", base.name, year),
        kind: SeriesKind::LoadMw,
        values: base.values.iter().map(|v| v * factor).collect(),
    })
}

/// Unit counts per generator type for one planning year.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationMix {
    pub year: usize,
    pub counts: BTreeMap<String, u32>,
}

impl GenerationMix {
    pub fn new(year: usize) -> Self {
        Self {
            year,
            counts: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, count: u32) -> Self {
        self.counts.insert(name.into(), count);
        self
    }

    pub fn count(&self, name: &str) -> u32 {
        self.counts.get(name).copied().unwrap_or(0)
    }

    pub fn validate(&self, fleet: &Fleet) -> Result<()> {
        match self.counts.keys().find(|k| fleet.get(k).is_none()) {
            Some(k) => Err(Error::UnknownType(k.clone())),
            None => Ok(()),
        }
    }
}
