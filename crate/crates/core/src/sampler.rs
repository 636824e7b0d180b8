//! Grid enumeration of feature mixes and labeled training datasets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adequacy::{derive_seed, label_sample, simulate_lolh, AdequacyConfig};
use crate::error::{Error, Result};
use crate::fleet::{Fleet, GenerationMix, HourlySeries, ProfileMap};
use crate::sweep::{csv_error, FeatureBounds, FeaturePartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Grid stride per feature; features not listed use `default_stride`.
    #[serde(default)]
    pub stride: BTreeMap<String, u32>,
    #[serde(default = "one")]
    pub default_stride: u32,
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> u32 {
    1
}

fn default_max_samples() -> usize {
    20_000
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            stride: BTreeMap::new(),
            default_stride: 1,
            max_samples: default_max_samples(),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn stride_for(&self, name: &str) -> u32 {
        self.stride.get(name).copied().unwrap_or(self.default_stride)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<i64>,
    pub lolh: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub year: usize,
    pub feature_names: Vec<String>,
    pub bounds: FeatureBounds,
    pub samples: Vec<LabeledSample>,
    pub sampler: SamplerConfig,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let ones = self.samples.iter().filter(|s| s.label == 1).count();
        [self.samples.len() - ones, ones]
    }
}

fn axis_points(bounds: &FeatureBounds, cfg: &SamplerConfig) -> Result<Vec<(i64, i64, u64)>> {
    bounds
        .features
        .iter()
        .map(|(name, r)| {
            if r.lower > r.upper {
                return Err(Error::EmptyGrid {
                    feature: name.clone(),
                    lower: r.lower,
                    upper: r.upper,
                });
            }
            let stride = cfg.stride_for(name);
            if stride == 0 {
                return Err(Error::invariant(format!("sampler.stride.{name}"), "must be at least 1"));
            }
            let stride = stride as i64;
            let count = ((r.upper - r.lower) / stride + 1) as u64;
            Ok((r.lower, stride, count))
        })
        .collect()
}

/// Number of grid points before subsampling.
pub fn grid_size(bounds: &FeatureBounds, cfg: &SamplerConfig) -> Result<u128> {
    Ok(axis_points(bounds, cfg)?.iter().map(|a| a.2 as u128).product())
}

/// Lexicographic grid over the feature box, subsampled to `max_samples` if larger.
pub fn enumerate_grid(bounds: &FeatureBounds, cfg: &SamplerConfig) -> Result<Vec<Vec<i64>>> {
    let axes = axis_points(bounds, cfg)?;
    let total: u128 = axes.iter().map(|a| a.2 as u128).product();
    let decode = |mut idx: u128| -> Vec<i64> {
        let mut x = vec![0; axes.len()];
        for (j, &(lower, stride, count)) in axes.iter().enumerate().rev() {
            let digit = (idx % count as u128) as i64;
            idx /= count as u128;
            x[j] = lower + digit * stride;
        }
        x
    };
    if total <= cfg.max_samples as u128 {
        return Ok((0..total).map(decode).collect());
    }
    let population = usize::try_from(total)
        .map_err(|_| Error::Config(format!("grid of {total} points is too large to subsample")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked = rand::seq::index::sample(&mut rng, population, cfg.max_samples).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| decode(i as u128)).collect())
}

/// Full mix for a feature vector, with nonfeature types at their fixed counts.
pub fn merge_mix(year: usize, names: &[String], x: &[i64], partition: &FeaturePartition) -> GenerationMix {
    let mut mix = GenerationMix::new(year);
    for (name, &count) in &partition.fixed_counts {
        mix.counts.insert(name.clone(), count);
    }
    for (name, &v) in names.iter().zip(x) {
        mix.counts.insert(name.clone(), v.max(0) as u32);
    }
    mix
}

/// Simulates and labels every vector; output order matches input order.
#[allow(clippy::too_many_arguments)]
pub fn build_dataset(
    year: usize,
    vectors: &[Vec<i64>],
    partition: &FeaturePartition,
    bounds: &FeatureBounds,
    fleet: &Fleet,
    load: &HourlySeries,
    profiles: &ProfileMap,
    adequacy: &AdequacyConfig,
    sampler: &SamplerConfig,
) -> Result<Dataset> {
    let names = bounds.names();
    if names != partition.feature_names() {
        return Err(Error::FeatureMismatch {
            year,
            expected: partition.feature_names(),
            found: names,
        });
    }
    let samples = vectors
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mix = merge_mix(year, &names, x, partition);
            let cfg = AdequacyConfig {
                seed: derive_seed(adequacy.seed, i as u64),
                ..adequacy.clone()
            };
            let r = simulate_lolh(fleet, &mix, load, profiles, &cfg).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })?;
            Ok(LabeledSample {
                x: x.clone(),
                lolh: r.lolh,
                label: label_sample(&r, adequacy),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        year,
        feature_names: names,
        bounds: bounds.clone(),
        samples,
        sampler: sampler.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub year: usize,
    pub count: usize,
    pub label_one_fraction: f64,
    pub lolh_min: f64,
    pub lolh_q1: f64,
    pub lolh_median: f64,
    pub lolh_q3: f64,
    pub lolh_max: f64,
    pub lolh_mean: f64,
}

impl DatasetSummary {
    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("year", self.year.to_string());
        kv("count", self.count.to_string());
        kv("label_one_fraction", self.label_one_fraction.to_string());
        kv("lolh_min", self.lolh_min.to_string());
        kv("lolh_q1", self.lolh_q1.to_string());
        kv("lolh_median", self.lolh_median.to_string());
        kv("lolh_q3", self.lolh_q3.to_string());
        kv("lolh_max", self.lolh_max.to_string());
        kv("lolh_mean", self.lolh_mean.to_string());
        kv(
            "quantile_method",
            "linear interpolation between order statistics".into(),
        );
        out
    }
}

/// Quantile of sorted data by linear interpolation at position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn dataset_summary(ds: &Dataset) -> Result<DatasetSummary> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut v: Vec<f64> = ds.samples.iter().map(|s| s.lolh).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(DatasetSummary {
        year: ds.year,
        count: v.len(),
        label_one_fraction: ds.label_counts()[1] as f64 / n,
        lolh_min: v[0],
        lolh_q1: quantile_sorted(&v, 0.25),
        lolh_median: quantile_sorted(&v, 0.5),
        lolh_q3: quantile_sorted(&v, 0.75),
        lolh_max: v[v.len() - 1],
        lolh_mean: v.iter().sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetMeta {
    year: usize,
    feature_names: Vec<String>,
    bounds: FeatureBounds,
    sampler: SamplerConfig,
    samples: usize,
}

/// Writes `features..., lolh, label` rows to `csv_path` and metadata JSON to `meta_path`.
pub fn write_dataset(ds: &Dataset, csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| csv_error(csv_path, e))?;
    let mut header = ds.feature_names.clone();
    header.push("lolh".into());
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_error(csv_path, e))?;
    for s in &ds.samples {
        let mut rec: Vec<String> = s.x.iter().map(i64::to_string).collect();
        rec.push(s.lolh.to_string());
        rec.push(s.label.to_string());
        w.write_record(&rec).map_err(|e| csv_error(csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let meta = DatasetMeta {
        year: ds.year,
        feature_names: ds.feature_names.clone(),
        bounds: ds.bounds.clone(),
        sampler: ds.sampler.clone(),
        samples: ds.samples.len(),
    };
    let meta_path = meta_path.as_ref();
    let text = serde_json::to_string_pretty(&meta).expect("dataset metadata serializes");
    fs::write(meta_path, text + "\n").map_err(|e| Error::io(meta_path, e))
}

pub fn read_dataset(csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Dataset> {
    let meta_path = meta_path.as_ref();
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: meta_path.into(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;

    let csv_path = csv_path.as_ref();
    let err = |line: usize, message: String| Error::Parse {
        path: csv_path.into(),
        location: format!("row {line}"),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(csv_path)
        .map_err(|e| csv_error(csv_path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let d = meta.feature_names.len();
    if header.len() != d + 2 || header[..d] != meta.feature_names[..] {
        return Err(err(
            1,
            format!("header {header:?} does not match features {:?}", meta.feature_names),
        ));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != d + 2 {
            return Err(err(line, format!("expected {} fields, found {}", d + 2, rec.len())));
        }
        let x = rec
            .iter()
            .take(d)
            .map(|v| {
                v.trim()
                    .parse::<i64>()
                    .map_err(|e| err(line, format!("feature `{v}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let lolh: f64 = rec[d]
            .trim()
            .parse()
            .map_err(|e| err(line, format!("lolh `{}`: {e}", &rec[d])))?;
        let label = match rec[d + 1].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(err(line, format!("label `{other}` is not 0 or 1"))),
        };
        samples.push(LabeledSample { x, lolh, label });
    }
    Ok(Dataset {
        year: meta.year,
        feature_names: meta.feature_names,
        bounds: meta.bounds,
        samples,
        sampler: meta.sampler,
    })
}
