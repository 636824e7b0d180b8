//! Reserve-margin sweep, feature-type partitioning and feature bounds.
//!
//! For every step size the sweep starts all years at a zero margin, solves the
//! margin-constrained expansion model, and raises the margin of each year
//! whose plan misses the LOLH threshold by that step. The unit counts of the
//! final plans form one column of the per-year sweep matrices.

use std::collections::BTreeMap;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adequacy::DEFAULT_LOLH_THRESHOLD;
use crate::error::{Error, Result};
use crate::fleet::{Category, Fleet, GenerationMix};

/// Guard against products such as `16 * 1.5` landing a hair above an integer.
const ROUNDING_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_steps")]
    pub step_sizes: Vec<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_threshold")]
    pub lolh_threshold: f64,
}

fn default_steps() -> Vec<f64> {
    vec![0.01, 0.02, 0.03, 0.04, 0.05]
}

fn default_max_iterations() -> usize {
    200
}

fn default_threshold() -> f64 {
    DEFAULT_LOLH_THRESHOLD
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            step_sizes: default_steps(),
            max_iterations: default_max_iterations(),
            lolh_threshold: default_threshold(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_sizes.is_empty() {
            return Err(Error::invariant(
                "sweep.step_sizes",
                "at least one step size is required",
            ));
        }
        if self.step_sizes.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invariant("sweep.step_sizes", "step sizes must be positive"));
        }
        if self.step_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invariant(
                "sweep.step_sizes",
                "step sizes must be strictly increasing",
            ));
        }
        Ok(())
    }
}

/// An expansion model that can be solved under per-year reserve margins.
pub trait MarginSolver: Sync {
    fn num_years(&self) -> usize;

    /// Optimal per-year mixes under `margins` (one entry per year).
    /// Infeasibility is reported as [`Error::Infeasible`].
    fn solve(&self, margins: &[f64]) -> Result<Vec<GenerationMix>>;

    /// LOLH of each year's mix.
    fn lolh(&self, mixes: &[GenerationMix]) -> Result<Vec<f64>>;
}

/// Trajectory of one step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: f64,
    pub iterations: usize,
    pub margins: Vec<f64>,
    pub mixes: Vec<GenerationMix>,
    pub lolh: Vec<f64>,
    /// LOLH of the zero-margin plan.
    pub initial_lolh: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMatrix {
    pub year: usize,
    pub step_sizes: Vec<f64>,
    /// Unit counts per type; column `k` belongs to `step_sizes[k]`.
    pub rows: IndexMap<String, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub steps: Vec<StepOutcome>,
    pub matrices: Vec<SweepMatrix>,
}

impl SweepOutcome {
    /// LOLH of the zero-margin plan, per year.
    pub fn zero_margin_lolh(&self) -> &[f64] {
        &self.steps[0].initial_lolh
    }
}

fn run_step(solver: &dyn MarginSolver, step: f64, cfg: &SweepConfig) -> Result<StepOutcome> {
    let years = solver.num_years();
    let mut margins = vec![0.0; years];
    let mut initial_lolh = None;
    let mut iterations = 0;
    loop {
        let mixes = solver.solve(&margins).map_err(|e| match e {
            Error::Infeasible(_) => Error::InfeasibleMargins {
                margins: margins.clone(),
            },
            other => other,
        })?;
        let lolh = solver.lolh(&mixes)?;
        if initial_lolh.is_none() {
            initial_lolh = Some(lolh.clone());
        }
        let failing: Vec<usize> = (0..years).filter(|&t| lolh[t] > cfg.lolh_threshold).collect();
        log::debug!("step {step}: iteration {iterations}, failing years {failing:?}");
        if failing.is_empty() {
            return Ok(StepOutcome {
                step,
                iterations,
                margins,
                mixes,
                lolh,
                initial_lolh: initial_lolh.unwrap_or_default(),
            });
        }
        if iterations >= cfg.max_iterations {
            return Err(Error::SweepNotConverged { step, iterations });
        }
        for t in failing {
            margins[t] += step;
        }
        iterations += 1;
    }
}

/// Runs the sweep for every step size (in parallel) and assembles the matrices.
pub fn run_margin_sweep(fleet: &Fleet, cfg: &SweepConfig, solver: &dyn MarginSolver) -> Result<SweepOutcome> {
    cfg.validate()?;
    let steps: Vec<StepOutcome> = cfg
        .step_sizes
        .par_iter()
        .map(|&s| run_step(solver, s, cfg))
        .collect::<Result<_>>()?;
    let matrices = (0..solver.num_years())
        .map(|t| SweepMatrix {
            year: t + 1,
            step_sizes: cfg.step_sizes.clone(),
            rows: fleet
                .iter()
                .map(|g| {
                    (
                        g.name.clone(),
                        steps.iter().map(|s| s.mixes[t].count(&g.name)).collect(),
                    )
                })
                .collect(),
        })
        .collect();
    Ok(SweepOutcome { steps, matrices })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeaturePartition {
    pub year: usize,
    pub feature_new: Vec<String>,
    pub feature_old: Vec<String>,
    pub nonfeature_new: Vec<String>,
    pub nonfeature_old: Vec<String>,
    pub fixed_counts: BTreeMap<String, u32>,
}

impl FeaturePartition {
    /// Canonical feature order: new feature types, then old, each in fleet order.
    pub fn feature_names(&self) -> Vec<String> {
        self.feature_new.iter().chain(&self.feature_old).cloned().collect()
    }

    pub fn is_feature(&self, name: &str) -> bool {
        self.feature_new.iter().chain(&self.feature_old).any(|n| n == name)
    }
}

fn rounded_median(row: &[u32]) -> u32 {
    let mut v: Vec<u32> = row.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        ((v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0).round() as u32
    }
}

/// Splits types into feature and nonfeature sets per year.
pub fn partition_feature_types(
    matrices: &[SweepMatrix],
    fleet: &Fleet,
    tolerance: f64,
) -> Result<Vec<FeaturePartition>> {
    if matrices.is_empty() {
        return Err(Error::invariant("sweep", "no sweep matrices to partition"));
    }
    matrices
        .iter()
        .map(|m| {
            let mut p = FeaturePartition {
                year: m.year,
                ..FeaturePartition::default()
            };
            for g in fleet.iter() {
                let row = m.rows.get(&g.name).ok_or_else(|| Error::UnknownType(g.name.clone()))?;
                match g.category {
                    Category::New => {
                        if row.iter().all(|&c| c == 0) {
                            p.nonfeature_new.push(g.name.clone());
                            p.fixed_counts.insert(g.name.clone(), 0);
                        } else {
                            p.feature_new.push(g.name.clone());
                        }
                    }
                    Category::Old => {
                        let init = g.initial_units as f64;
                        if row.iter().all(|&c| (c as f64 - init).abs() <= tolerance * init) {
                            p.nonfeature_old.push(g.name.clone());
                            p.fixed_counts.insert(g.name.clone(), rounded_median(row));
                        } else {
                            p.feature_old.push(g.name.clone());
                        }
                    }
                }
            }
            Ok(p)
        })
        .collect()
}

/// Relaxation fractions applied to sweep extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationConfig {
    #[serde(default = "default_relax")]
    pub down: f64,
    #[serde(default = "default_relax")]
    pub up: f64,
    /// Later entries win; a year-specific entry beats a type-wide one.
    #[serde(default)]
    pub overrides: Vec<RelaxOverride>,
}

fn default_relax() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxOverride {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default)]
    pub year: Option<usize>,
    #[serde(default)]
    pub down: Option<f64>,
    #[serde(default)]
    pub up: Option<f64>,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            down: default_relax(),
            up: default_relax(),
            overrides: Vec::new(),
        }
    }
}

impl RelaxationConfig {
    pub fn uniform(down: f64, up: f64) -> Self {
        Self {
            down,
            up,
            overrides: Vec::new(),
        }
    }

    /// Effective `(down, up)` for a type in a year.
    pub fn resolve(&self, type_name: &str, year: usize) -> (f64, f64) {
        let mut down = self.down;
        let mut up = self.up;
        let matching = |o: &&RelaxOverride| o.type_name == type_name;
        for o in self.overrides.iter().filter(matching).filter(|o| o.year.is_none()) {
            down = o.down.unwrap_or(down);
            up = o.up.unwrap_or(up);
        }
        for o in self.overrides.iter().filter(matching).filter(|o| o.year == Some(year)) {
            down = o.down.unwrap_or(down);
            up = o.up.unwrap_or(up);
        }
        (down, up)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |down: f64, up: f64, what: &str| {
            if !(0.0..=1.0).contains(&down) {
                return Err(Error::invariant(format!("{what}.down"), "must lie in [0, 1]"));
            }
            if !(up >= 0.0) || !up.is_finite() {
                return Err(Error::invariant(format!("{what}.up"), "must be nonnegative"));
            }
            Ok(())
        };
        check(self.down, self.up, "relaxation")?;
        for o in &self.overrides {
            check(
                o.down.unwrap_or(0.0),
                o.up.unwrap_or(0.0),
                &format!("relaxation.{}", o.type_name),
            )?;
        }
        Ok(())
    }
}

/// Integer bounds for one feature type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub lower: i64,
    pub upper: i64,
    pub sweep_min: u32,
    pub sweep_max: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub year: usize,
    /// Ranges keyed by feature name, in canonical feature order.
    pub features: IndexMap<String, FeatureRange>,
}

impl FeatureBounds {
    pub fn names(&self) -> Vec<String> {
        self.features.keys().cloned().collect()
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.features.values().map(|r| r.lower as f64).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.features.values().map(|r| r.upper as f64).collect()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && self
                .features
                .values()
                .zip(x)
                .all(|(r, &v)| r.lower <= v && v <= r.upper)
    }
}

/// `lower = floor(min * (1 - down))` clamped at zero, `upper = ceil(max * (1 + up))`.
pub fn relaxed_bounds(sweep_min: u32, sweep_max: u32, down: f64, up: f64) -> (i64, i64) {
    let lower = (sweep_min as f64 * (1.0 - down) + ROUNDING_GUARD).floor().max(0.0) as i64;
    let upper = (sweep_max as f64 * (1.0 + up) - ROUNDING_GUARD).ceil() as i64;
    (lower.min(sweep_min as i64), upper.max(sweep_max as i64))
}

pub fn compute_feature_bounds(
    matrices: &[SweepMatrix],
    partitions: &[FeaturePartition],
    relax: &RelaxationConfig,
) -> Result<Vec<FeatureBounds>> {
    relax.validate()?;
    if matrices.len() != partitions.len() {
        return Err(Error::LengthMismatch {
            what: "feature partitions".into(),
            expected: matrices.len(),
            found: partitions.len(),
        });
    }
    matrices
        .iter()
        .zip(partitions)
        .map(|(m, p)| {
            let mut features = IndexMap::new();
            for name in p.feature_names() {
                let row = m.rows.get(&name).ok_or_else(|| Error::UnknownType(name.clone()))?;
                let sweep_min = row.iter().copied().min().unwrap_or(0);
                let sweep_max = row.iter().copied().max().unwrap_or(0);
                let (down, up) = relax.resolve(&name, m.year);
                let (lower, upper) = relaxed_bounds(sweep_min, sweep_max, down, up);
                features.insert(
                    name,
                    FeatureRange {
                        lower,
                        upper,
                        sweep_min,
                        sweep_max,
                    },
                );
            }
            Ok(FeatureBounds { year: m.year, features })
        })
        .collect()
}

/// Partition and bounds written next to each sweep matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSidecar {
    pub year: usize,
    pub step_sizes: Vec<f64>,
    pub partition: FeaturePartition,
    pub bounds: FeatureBounds,
}

pub fn write_sweep_csv(matrix: &SweepMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["type".to_string()];
    header.extend(matrix.step_sizes.iter().map(|s| format!("step_{s}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (name, row) in &matrix.rows {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u32::to_string));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: impl AsRef<Path>, year: usize) -> Result<SweepMatrix> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        location: format!("row {line}"),
        message,
    };
    let step_sizes = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("step_")
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| parse_err(1, format!("bad column header `{h}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = IndexMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != step_sizes.len() + 1 {
            return Err(parse_err(line, format!("expected {} fields", step_sizes.len() + 1)));
        }
        let counts = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<u32>().map_err(|e| parse_err(line, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        rows.insert(rec[0].to_string(), counts);
    }
    Ok(SweepMatrix { year, step_sizes, rows })
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.into(),
            location: "csv".into(),
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::GeneratorType;
    use proptest::prelude::*;

    fn gen(name: &str, category: Category, initial: u32) -> GeneratorType {
        GeneratorType {
            name: name.into(),
            category,
            unit_capacity_mw: 25.0,
            forced_outage_rate: 0.1,
            is_renewable: false,
            profile_ref: None,
            capital_cost: 1.0,
            fixed_om_cost: 0.0,
            variable_cost: 0.0,
            co2_rate: 0.0,
            initial_units: initial,
            lifetime_expiry_year: None,
        }
    }

    /// Builds `ceil((1 + rm) * peak / 25)` peakers; a year passes with 22.5 MW per unit.
    struct Peakers {
        peaks: Vec<f64>,
    }

    impl MarginSolver for Peakers {
        fn num_years(&self) -> usize {
            self.peaks.len()
        }

        fn solve(&self, margins: &[f64]) -> Result<Vec<GenerationMix>> {
            Ok(margins
                .iter()
                .zip(&self.peaks)
                .enumerate()
                .map(|(t, (rm, p))| {
                    let n = ((1.0 + rm) * p / 25.0 - 1e-9).ceil() as u32;
                    GenerationMix::new(t + 1).with("ct", n)
                })
                .collect())
        }

        fn lolh(&self, mixes: &[GenerationMix]) -> Result<Vec<f64>> {
            Ok(mixes
                .iter()
                .zip(&self.peaks)
                .map(|(m, p)| if m.count("ct") as f64 * 22.5 < *p { 24.0 } else { 0.0 })
                .collect())
        }
    }

    #[test]
    fn sweep_columns_follow_step_size() {
        let fleet = Fleet::new(vec![gen("ct", Category::New, 0)]).unwrap();
        let cfg = SweepConfig {
            step_sizes: vec![0.25, 0.5],
            ..SweepConfig::default()
        };
        let out = run_margin_sweep(&fleet, &cfg, &Peakers { peaks: vec![100.0] }).unwrap();
        assert_eq!(out.matrices[0].rows["ct"], vec![5, 6]);
        assert_eq!(out.zero_margin_lolh(), &[24.0]);
        assert_eq!(out.steps[0].margins, vec![0.25]);
    }

    #[test]
    fn reliable_at_zero_margin_exits_immediately() {
        let fleet = Fleet::new(vec![gen("ct", Category::New, 0)]).unwrap();
        let out = run_margin_sweep(&fleet, &SweepConfig::default(), &Peakers { peaks: vec![0.0] }).unwrap();
        assert!(out.steps.iter().all(|s| s.iterations == 0));
        assert_eq!(out.matrices[0].rows["ct"], vec![0; 5]);
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let fleet = Fleet::new(vec![gen("ct", Category::New, 0)]).unwrap();
        let cfg = SweepConfig {
            step_sizes: vec![0.01],
            max_iterations: 0,
            ..SweepConfig::default()
        };
        let err = run_margin_sweep(&fleet, &cfg, &Peakers { peaks: vec![100.0] }).unwrap_err();
        assert!(matches!(err, Error::SweepNotConverged { iterations: 0, .. }));
    }

    #[test]
    fn step_sizes_must_increase() {
        let cfg = SweepConfig {
            step_sizes: vec![0.02, 0.01],
            ..SweepConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn matrix(rows: &[(&str, Vec<u32>)]) -> SweepMatrix {
        SweepMatrix {
            year: 1,
            step_sizes: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            rows: rows.iter().map(|(n, r)| (n.to_string(), r.clone())).collect(),
        }
    }

    #[test]
    fn partition_rules() {
        let fleet = Fleet::new(vec![
            gen("zero-new", Category::New, 0),
            gen("varying-new", Category::New, 0),
            gen("kept-old", Category::Old, 40),
            gen("near-old", Category::Old, 200),
            gen("retired-old", Category::Old, 40),
        ])
        .unwrap();
        let m = matrix(&[
            ("zero-new", vec![0; 5]),
            ("varying-new", vec![3, 4, 4, 5, 6]),
            ("kept-old", vec![40; 5]),
            ("near-old", vec![199, 199, 198, 200, 199]),
            ("retired-old", vec![30, 31, 32, 33, 34]),
        ]);
        let p = &partition_feature_types(&[m], &fleet, 0.01).unwrap()[0];
        assert_eq!(p.nonfeature_new, vec!["zero-new"]);
        assert_eq!(p.feature_new, vec!["varying-new"]);
        assert_eq!(p.nonfeature_old, vec!["kept-old", "near-old"]);
        assert_eq!(p.feature_old, vec!["retired-old"]);
        assert_eq!(p.fixed_counts["zero-new"], 0);
        assert_eq!(p.fixed_counts["kept-old"], 40);
        assert_eq!(p.fixed_counts["near-old"], 199);
        assert_eq!(p.feature_names(), vec!["varying-new", "retired-old"]);
    }

    #[test]
    fn published_bound_examples() {
        assert_eq!(relaxed_bounds(432, 435, 0.0046, 0.02), (430, 444));
        assert_eq!(relaxed_bounds(16, 16, 1.0, 0.5), (0, 24));
        assert_eq!(relaxed_bounds(5, 5, 0.0, 0.0), (5, 5));
    }

    #[test]
    fn overrides_resolve_by_specificity() {
        let relax = RelaxationConfig {
            down: 0.05,
            up: 0.05,
            overrides: vec![
                RelaxOverride {
                    type_name: "a".into(),
                    year: Some(2),
                    down: Some(1.0),
                    up: None,
                },
                RelaxOverride {
                    type_name: "a".into(),
                    year: None,
                    down: Some(0.5),
                    up: Some(0.5),
                },
            ],
        };
        assert_eq!(relax.resolve("a", 1), (0.5, 0.5));
        assert_eq!(relax.resolve("a", 2), (1.0, 0.5));
        assert_eq!(relax.resolve("b", 2), (0.05, 0.05));
        assert!(RelaxationConfig::uniform(1.5, 0.0).validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("year_1.csv");
        let m = matrix(&[("a", vec![1, 2, 3, 4, 5]), ("b", vec![0; 5])]);
        write_sweep_csv(&m, &path).unwrap();
        assert_eq!(read_sweep_csv(&path, 1).unwrap(), m);
    }

    proptest! {
        #[test]
        fn bounds_enclose_sweep_extrema(
            row in proptest::collection::vec(0u32..2000, 1..8),
            down in 0.0f64..=1.0,
            up in 0.0f64..3.0,
        ) {
            let lo = *row.iter().min().unwrap();
            let hi = *row.iter().max().unwrap();
            let (l, u) = relaxed_bounds(lo, hi, down, up);
            prop_assert!(l >= 0);
            prop_assert!(l <= lo as i64);
            prop_assert!(u >= hi as i64);
        }
    }
}
