//! Chronological loss-of-load-hours simulation under forced outages.
//!
//! Two modes are available. `Derated` scales every unit by its availability
//! `1 - FOR` and counts hours with a capacity shortfall. `MonteCarlo` draws
//! each unit's availability independently per hour and replication from a
//! counter-based generator, so results do not depend on evaluation order or
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::{Fleet, GenerationMix, HourlySeries, ProfileMap};

/// Loss-of-load hours allowed by the one-day-in-ten-years criterion.
pub const DEFAULT_LOLH_THRESHOLD: f64 = 2.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdequacyMode {
    Derated,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdequacyConfig {
    #[serde(default = "derated")]
    pub mode: AdequacyMode,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub lolh_threshold: f64,
}

fn derated() -> AdequacyMode {
    AdequacyMode::Derated
}

fn one() -> usize {
    1
}

fn default_threshold() -> f64 {
    DEFAULT_LOLH_THRESHOLD
}

impl Default for AdequacyConfig {
    fn default() -> Self {
        Self {
            mode: AdequacyMode::Derated,
            replications: 1,
            seed: 0,
            lolh_threshold: DEFAULT_LOLH_THRESHOLD,
        }
    }
}

impl AdequacyConfig {
    pub fn monte_carlo(replications: usize, seed: u64) -> Self {
        Self {
            mode: AdequacyMode::MonteCarlo,
            replications,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::invariant("adequacy.replications", "must be at least 1"));
        }
        if !(self.lolh_threshold > 0.0) {
            return Err(Error::invariant("adequacy.lolh_threshold", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    /// Expected loss-of-load hours over the simulated period.
    pub lolh: f64,
    /// Expected unserved energy in MWh.
    pub eue_mwh: f64,
    pub mode: AdequacyMode,
    pub replications: usize,
    pub seed: u64,
    /// Standard error of `lolh` across replications (zero when derated).
    pub lolh_std_error: f64,
}

struct UnitBlock<'a> {
    type_index: u64,
    count: u32,
    unit_mw: f64,
    outage_rate: f64,
    profile: Option<&'a [f64]>,
}

impl UnitBlock<'_> {
    fn factor(&self, hour: usize) -> f64 {
        self.profile.map_or(1.0, |p| p[hour])
    }
}

fn resolve<'a>(
    fleet: &'a Fleet,
    mix: &GenerationMix,
    profiles: &'a ProfileMap,
    hours: Option<usize>,
) -> Result<Vec<UnitBlock<'a>>> {
    mix.validate(fleet)?;
    let mut blocks = Vec::new();
    for (i, t) in fleet.iter().enumerate() {
        let count = mix.count(&t.name);
        if count == 0 {
            continue;
        }
        let profile = if t.is_renewable {
            let key = t.profile_ref.clone().unwrap_or_default();
            let series = profiles.get(&key).ok_or_else(|| Error::MissingProfile {
                name: t.name.clone(),
                profile: key.clone(),
            })?;
            if let Some(h) = hours {
                if series.len() != h {
                    return Err(Error::LengthMismatch {
                        what: format!("profile `{key}`"),
                        expected: h,
                        found: series.len(),
                    });
                }
            }
            Some(series.values())
        } else {
            None
        };
        blocks.push(UnitBlock {
            type_index: i as u64,
            count,
            unit_mw: t.unit_capacity_mw,
            outage_rate: t.forced_outage_rate,
            profile,
        });
    }
    Ok(blocks)
}

fn derated_at(blocks: &[UnitBlock<'_>], hour: usize) -> f64 {
    blocks
        .iter()
        .map(|b| b.count as f64 * b.unit_mw * (1.0 - b.outage_rate) * b.factor(hour))
        .sum()
}

/// Expected available capacity at `hour` with every unit derated by its outage rate.
pub fn available_capacity_derated(
    fleet: &Fleet,
    mix: &GenerationMix,
    profiles: &ProfileMap,
    hour: usize,
) -> Result<f64> {
    let blocks = resolve(fleet, mix, profiles, None)?;
    for b in &blocks {
        if let Some(p) = b.profile {
            if hour >= p.len() {
                return Err(Error::LengthMismatch {
                    what: "capacity-factor hour index".into(),
                    expected: p.len(),
                    found: hour + 1,
                });
            }
        }
    }
    Ok(derated_at(&blocks, hour))
}

/// Counter-based uniform draw in `[0, 1)` keyed by the full unit-hour identity.
pub(crate) fn unit_uniform(seed: u64, type_index: u64, unit: u64, hour: u64, rep: u64) -> f64 {
    let mut state = seed;
    for word in [type_index, unit, hour, rep] {
        state = splitmix64(state ^ word.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    (state >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent seed for the `index`-th simulation drawn from a base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates loss-of-load hours of `mix` against `load`.
pub fn simulate_lolh(
    fleet: &Fleet,
    mix: &GenerationMix,
    load: &HourlySeries,
    profiles: &ProfileMap,
    cfg: &AdequacyConfig,
) -> Result<ReliabilityResult> {
    cfg.validate()?;
    let hours = load.len();
    let blocks = resolve(fleet, mix, profiles, Some(hours))?;
    let demand = load.values();

    match cfg.mode {
        AdequacyMode::Derated => {
            let mut lolh = 0usize;
            let mut eue = 0.0;
            for (h, &d) in demand.iter().enumerate() {
                let avail = derated_at(&blocks, h);
                if avail < d {
                    lolh += 1;
                    eue += d - avail;
                }
            }
            Ok(ReliabilityResult {
                lolh: lolh as f64,
                eue_mwh: eue,
                mode: AdequacyMode::Derated,
                replications: 1,
                seed: cfg.seed,
                lolh_std_error: 0.0,
            })
        }
        AdequacyMode::MonteCarlo => {
            let per_rep: Vec<(u32, f64)> = (0..cfg.replications as u64)
                .into_par_iter()
                .map(|r| replicate(&blocks, demand, cfg.seed, r))
                .collect();
            let n = per_rep.len() as f64;
            let mut hours_sum = 0u64;
            let mut hours_sq = 0u64;
            let mut eue = 0.0;
            for &(k, e) in &per_rep {
                hours_sum += k as u64;
                hours_sq += (k as u64) * (k as u64);
                eue += e;
            }
            let mean = hours_sum as f64 / n;
            let var = if per_rep.len() > 1 {
                ((hours_sq as f64) - n * mean * mean).max(0.0) / (n - 1.0)
            } else {
                0.0
            };
            Ok(ReliabilityResult {
                lolh: mean,
                eue_mwh: eue / n,
                mode: AdequacyMode::MonteCarlo,
                replications: cfg.replications,
                seed: cfg.seed,
                lolh_std_error: (var / n).sqrt(),
            })
        }
    }
}

fn replicate(blocks: &[UnitBlock<'_>], demand: &[f64], seed: u64, rep: u64) -> (u32, f64) {
    let mut loss_hours = 0u32;
    let mut unserved = 0.0;
    for (h, &d) in demand.iter().enumerate() {
        let mut avail = 0.0;
        for b in blocks {
            let up = (0..b.count as u64)
                .filter(|&u| unit_uniform(seed, b.type_index, u, h as u64, rep) >= b.outage_rate)
                .count();
            avail += up as f64 * b.unit_mw * b.factor(h);
        }
        if avail < d {
            loss_hours += 1;
            unserved += d - avail;
        }
    }
    (loss_hours, unserved)
}

/// `1` when the result meets the loss-of-load threshold (inclusive), else `0`.
pub fn label_sample(result: &ReliabilityResult, cfg: &AdequacyConfig) -> u8 {
    u8::from(result.lolh <= cfg.lolh_threshold)
}
