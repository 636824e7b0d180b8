//! Multi-year generation expansion models.
//!
//! Both variants share the same skeleton: integer builds (new types) or
//! retirements (old types) per year, integer operating counts `ngo`, linear
//! economic dispatch over representative hours, and unserved energy. The
//! reserve-margin variant adds one firm-capacity row per year; the
//! reliability-verification variant instead fixes nonfeature counts and
//! constrains the feature counts of selected years to a disjunction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::adequacy::{simulate_lolh, AdequacyConfig, ReliabilityResult};
use crate::error::{Error, Result};
use crate::fleet::{scale_demand, Category, Fleet, GenerationMix, HourlySeries, PlanningHorizon, ProfileMap};
use crate::hull::{encode_disjunction, Disjunction, HullEncoding};
use crate::milp::{format_number, solve_milp_with, MilpModel, MilpSolution, MilpStatus, Sense, Tolerances, VarId};
use crate::sweep::{FeaturePartition, MarginSolver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GepConfig {
    pub horizon: PlanningHorizon,
    /// Hour indices used for dispatch; all hours when absent.
    #[serde(default)]
    pub representative_hours: Option<Vec<usize>>,
    /// Weight of each representative hour; defaults to `H / |hours|`.
    #[serde(default)]
    pub hour_weight: Option<f64>,
    /// Currency per MWh of unserved energy.
    pub unserved_energy_penalty: f64,
    /// Reserve margin per year (margin variant only); empty means zero.
    #[serde(default)]
    pub reserve_margins: Vec<f64>,
    /// Capacity credit of renewable types in the margin rows (default 0).
    #[serde(default)]
    pub renewable_credit: BTreeMap<String, f64>,
    #[serde(default)]
    pub discount_rate: f64,
    /// Cap on the operating count of each new type.
    #[serde(default = "default_max_units")]
    pub max_new_units: u32,
    #[serde(default)]
    pub max_units: BTreeMap<String, u32>,
}

fn default_max_units() -> u32 {
    100
}

impl GepConfig {
    pub fn new(horizon: PlanningHorizon, unserved_energy_penalty: f64) -> Self {
        Self {
            horizon,
            representative_hours: None,
            hour_weight: None,
            unserved_energy_penalty,
            reserve_margins: Vec::new(),
            renewable_credit: BTreeMap::new(),
            discount_rate: 0.0,
            max_new_units: default_max_units(),
            max_units: BTreeMap::new(),
        }
    }

    pub fn margin(&self, year: usize) -> f64 {
        self.reserve_margins.get(year - 1).copied().unwrap_or(0.0)
    }

    pub fn discount(&self, year: usize) -> f64 {
        (1.0 + self.discount_rate).powi(-(year as i32 - 1))
    }

    fn hours(&self, total: usize) -> Vec<usize> {
        self.representative_hours
            .clone()
            .unwrap_or_else(|| (0..total).collect())
    }

    pub fn validate(&self, fleet: &Fleet, total_hours: usize) -> Result<()> {
        self.horizon.validate()?;
        if !(self.unserved_energy_penalty > 0.0) {
            return Err(Error::invariant("gep.unserved_energy_penalty", "must be positive"));
        }
        if !self.reserve_margins.is_empty() && self.reserve_margins.len() != self.horizon.num_years {
            return Err(Error::LengthMismatch {
                what: "gep.reserve_margins".into(),
                expected: self.horizon.num_years,
                found: self.reserve_margins.len(),
            });
        }
        if self.reserve_margins.iter().any(|rm| !(*rm >= 0.0)) {
            return Err(Error::invariant("gep.reserve_margins", "margins must be nonnegative"));
        }
        for (name, credit) in &self.renewable_credit {
            let g = fleet.get(name).ok_or_else(|| Error::UnknownType(name.clone()))?;
            if !g.is_renewable {
                return Err(Error::invariant(
                    format!("gep.renewable_credit.{name}"),
                    "credit given for a type that is not renewable",
                ));
            }
            if !(0.0..=1.0).contains(credit) {
                return Err(Error::invariant(
                    format!("gep.renewable_credit.{name}"),
                    "must lie in [0, 1]",
                ));
            }
        }
        if let Some(name) = self.max_units.keys().find(|n| fleet.get(n).is_none()) {
            return Err(Error::UnknownType(name.clone()));
        }
        let hours = self.hours(total_hours);
        if hours.is_empty() {
            return Err(Error::invariant(
                "gep.representative_hours",
                "at least one hour is required",
            ));
        }
        if let Some(h) = hours.iter().find(|&&h| h >= total_hours) {
            return Err(Error::invariant(
                "gep.representative_hours",
                format!("hour {h} is outside the {total_hours}-hour series"),
            ));
        }
        if self.hour_weight.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::invariant("gep.hour_weight", "must be positive"));
        }
        if !(self.discount_rate > -1.0) {
            return Err(Error::invariant("gep.discount_rate", "must exceed -1"));
        }
        Ok(())
    }
}

/// Cost category of a model column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostTag {
    Capital,
    FixedOm,
    VariableCarbon,
    Unserved,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GepVariant {
    ReserveMargin,
    ReliabilityVerification,
}

/// A built expansion model and the columns needed to read a plan back.
#[derive(Debug, Clone)]
pub struct GepModel {
    pub variant: GepVariant,
    pub model: MilpModel,
    pub type_names: Vec<String>,
    /// `ngo[t][i]` for year `t + 1` and type `i`.
    pub ngo: Vec<Vec<VarId>>,
    pub builds: Vec<Vec<Option<VarId>>>,
    pub retirements: Vec<Vec<Option<VarId>>>,
    pub tags: Vec<CostTag>,
    /// Disjunction encodings keyed by year.
    pub encodings: BTreeMap<usize, HullEncoding>,
}

fn series_for<'a>(fleet: &Fleet, profiles: &'a ProfileMap, hours: usize) -> Result<Vec<Option<&'a [f64]>>> {
    fleet
        .iter()
        .map(|g| {
            if !g.is_renewable {
                return Ok(None);
            }
            let key = g.profile_ref.clone().unwrap_or_default();
            let s = profiles.get(&key).ok_or_else(|| Error::MissingProfile {
                name: g.name.clone(),
                profile: key.clone(),
            })?;
            if s.len() != hours {
                return Err(Error::LengthMismatch {
                    what: format!("profile `{key}`"),
                    expected: hours,
                    found: s.len(),
                });
            }
            Ok(Some(s.values()))
        })
        .collect()
}

fn build_common(
    fleet: &Fleet,
    base_load: &HourlySeries,
    profiles: &ProfileMap,
    cfg: &GepConfig,
    variant: GepVariant,
) -> Result<GepModel> {
    cfg.validate(fleet, base_load.len())?;
    let years = cfg.horizon.num_years;
    let hours = cfg.hours(base_load.len());
    let weight = cfg.hour_weight.unwrap_or(base_load.len() as f64 / hours.len() as f64);
    let cf = series_for(fleet, profiles, base_load.len())?;
    let name = match variant {
        GepVariant::ReserveMargin => "gep_rm",
        GepVariant::ReliabilityVerification => "gep_rvc",
    };

    let mut m = MilpModel::new(name);
    let mut tags = Vec::new();
    let mut add = |id: VarId, tag: CostTag| {
        debug_assert_eq!(id.0, tags.len());
        tags.push(tag);
        id
    };
    let mut ngo = Vec::with_capacity(years);
    let mut builds = Vec::with_capacity(years);
    let mut retirements = Vec::with_capacity(years);

    for t in 1..=years {
        let disc = cfg.discount(t);
        let load = scale_demand(base_load, &cfg.horizon, t)?;
        let tax = cfg.horizon.carbon_tax(t);
        let mut year_ngo = Vec::with_capacity(fleet.len());
        let mut year_builds = Vec::with_capacity(fleet.len());
        let mut year_ret = Vec::with_capacity(fleet.len());
        for (i, g) in fleet.iter().enumerate() {
            let cap = match g.category {
                Category::New => cfg.max_units.get(&g.name).copied().unwrap_or(cfg.max_new_units),
                Category::Old => g.initial_units,
            } as f64;
            let v = m.add_integer(format!("ngo_{}_y{t}", g.name), 0.0, cap, disc * g.fixed_om_cost);
            let v = add(v, CostTag::FixedOm);
            year_ngo.push(v);
            let prev = if t == 1 {
                None
            } else {
                Some(ngo.last().map(|y: &Vec<VarId>| y[i]).unwrap())
            };
            match g.category {
                Category::New => {
                    let b = m.add_integer(format!("build_{}_y{t}", g.name), 0.0, cap, disc * g.capital_cost);
                    let b = add(b, CostTag::Capital);
                    let mut coeffs = vec![(v, 1.0), (b, -1.0)];
                    if let Some(p) = prev {
                        coeffs.push((p, -1.0));
                    }
                    m.add_row(format!("count_{}_y{t}", g.name), coeffs, Sense::Eq, 0.0);
                    year_builds.push(Some(b));
                    year_ret.push(None);
                }
                Category::Old => {
                    let r = m.add_integer(format!("retire_{}_y{t}", g.name), 0.0, cap, 0.0);
                    let r = add(r, CostTag::None);
                    let mut coeffs = vec![(v, 1.0), (r, 1.0)];
                    let rhs = match prev {
                        Some(p) => {
                            coeffs.push((p, -1.0));
                            0.0
                        }
                        None => cap,
                    };
                    m.add_row(format!("count_{}_y{t}", g.name), coeffs, Sense::Eq, rhs);
                    if g.lifetime_expiry_year.is_some_and(|e| t > e) {
                        m.add_row(format!("expire_{}_y{t}", g.name), [(v, 1.0)], Sense::Le, 0.0);
                    }
                    year_builds.push(None);
                    year_ret.push(Some(r));
                }
            }
        }

        for &h in &hours {
            let mut balance = Vec::with_capacity(fleet.len() + 1);
            for (i, g) in fleet.iter().enumerate() {
                let avail = g.unit_capacity_mw * cf[i].map_or(1.0, |c| c[h]);
                let cost = disc * weight * (g.variable_cost + g.co2_rate * tax);
                let p = m.add_continuous(format!("p_{}_h{h}_y{t}", g.name), 0.0, f64::INFINITY, cost);
                let p = add(p, CostTag::VariableCarbon);
                m.add_row(
                    format!("dispatch_{}_h{h}_y{t}", g.name),
                    [(p, 1.0), (year_ngo[i], -avail)],
                    Sense::Le,
                    0.0,
                );
                balance.push((p, 1.0));
            }
            let demand = load.values()[h];
            let u = m.add_continuous(
                format!("unserved_h{h}_y{t}"),
                0.0,
                demand,
                disc * weight * cfg.unserved_energy_penalty,
            );
            let u = add(u, CostTag::Unserved);
            balance.push((u, 1.0));
            m.add_row(format!("balance_h{h}_y{t}"), balance, Sense::Eq, demand);
        }

        if variant == GepVariant::ReserveMargin {
            let coeffs: Vec<(VarId, f64)> = fleet
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let credit = if g.is_renewable {
                        cfg.renewable_credit.get(&g.name).copied().unwrap_or(0.0)
                    } else {
                        1.0
                    };
                    (year_ngo[i], credit * g.unit_capacity_mw)
                })
                .collect();
            m.add_row(
                format!("margin_y{t}"),
                coeffs,
                Sense::Ge,
                (1.0 + cfg.margin(t)) * load.peak(),
            );
        }

        ngo.push(year_ngo);
        builds.push(year_builds);
        retirements.push(year_ret);
    }

    Ok(GepModel {
        variant,
        model: m,
        type_names: fleet.iter().map(|g| g.name.clone()).collect(),
        ngo,
        builds,
        retirements,
        tags,
        encodings: BTreeMap::new(),
    })
}

/// Expansion model with one reserve-margin row per year.
pub fn build_gep_rm(
    fleet: &Fleet,
    base_load: &HourlySeries,
    profiles: &ProfileMap,
    cfg: &GepConfig,
) -> Result<GepModel> {
    build_common(fleet, base_load, profiles, cfg, GepVariant::ReserveMargin)
}

/// Expansion model whose constrained years must pick a feature mix inside
/// the given disjunction, with nonfeature counts fixed in those years.
pub fn build_gep_rvc(
    fleet: &Fleet,
    base_load: &HourlySeries,
    profiles: &ProfileMap,
    cfg: &GepConfig,
    disjunctions: &BTreeMap<usize, Disjunction>,
    partitions: &[FeaturePartition],
) -> Result<GepModel> {
    let mut g = build_common(fleet, base_load, profiles, cfg, GepVariant::ReliabilityVerification)?;
    for (&year, disj) in disjunctions {
        if year < 1 || year > cfg.horizon.num_years {
            return Err(Error::YearOutOfRange {
                year,
                years: cfg.horizon.num_years,
            });
        }
        let part = partitions
            .iter()
            .find(|p| p.year == year)
            .ok_or_else(|| Error::Config(format!("no feature partition for year {year}")))?;
        let names = part.feature_names();
        if names != disj.feature_names {
            return Err(Error::FeatureMismatch {
                year,
                expected: names,
                found: disj.feature_names.clone(),
            });
        }
        let t = year - 1;
        for (name, &count) in &part.fixed_counts {
            let i = fleet.position(name).ok_or_else(|| Error::UnknownType(name.clone()))?;
            let v = g.ngo[t][i];
            let var = g.model.var(v);
            if (count as f64) < var.lower || (count as f64) > var.upper {
                return Err(Error::Config(format!(
                    "year {year}: fixed count {count} for `{name}` lies outside [{}, {}]",
                    var.lower, var.upper
                )));
            }
            g.model
                .add_row(format!("fix_{name}_y{year}"), [(v, 1.0)], Sense::Eq, count as f64);
        }
        let mut x_vars = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let i = fleet.position(name).ok_or_else(|| Error::UnknownType(name.clone()))?;
            let v = g.ngo[t][i];
            let var = g.model.var_mut(v);
            var.lower = var.lower.max(disj.lower[j]);
            var.upper = var.upper.min(disj.upper[j]);
            if var.lower > var.upper {
                return Err(Error::Infeasible(format!(
                    "year {year}: box for `{name}` does not meet the count limits"
                )));
            }
            x_vars.push(v);
        }
        let n0 = g.model.num_vars();
        let enc = encode_disjunction(&mut g.model, disj, &x_vars)?;
        g.tags
            .extend(std::iter::repeat_n(CostTag::None, g.model.num_vars() - n0));
        g.encodings.insert(year, enc);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_node_limit")]
    pub node_limit: usize,
    #[serde(default = "default_gap")]
    pub gap: f64,
}

fn default_node_limit() -> usize {
    100_000
}

fn default_gap() -> f64 {
    1e-9
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            node_limit: default_node_limit(),
            gap: default_gap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub builds: u32,
    pub retirements: u32,
    pub ngo: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub capital: f64,
    pub fixed_om: f64,
    pub variable_carbon: f64,
    pub unserved: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.capital + self.fixed_om + self.variable_carbon + self.unserved
    }

    pub fn investment(&self) -> f64 {
        self.capital
    }

    pub fn operational(&self) -> f64 {
        self.fixed_om + self.variable_carbon + self.unserved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// One map per year, keyed by type name in fleet order.
    pub years: Vec<IndexMap<String, PlanEntry>>,
    pub breakdown: CostBreakdown,
    pub objective: f64,
}

impl Plan {
    pub fn num_years(&self) -> usize {
        self.years.len()
    }

    pub fn mix(&self, year: usize) -> GenerationMix {
        let mut mix = GenerationMix::new(year);
        for (name, e) in &self.years[year - 1] {
            mix.counts.insert(name.clone(), e.ngo);
        }
        mix
    }

    pub fn mixes(&self) -> Vec<GenerationMix> {
        (1..=self.num_years()).map(|t| self.mix(t)).collect()
    }

    /// Operating counts of `names` in `year`.
    pub fn feature_vector(&self, year: usize, names: &[String]) -> Vec<f64> {
        names
            .iter()
            .map(|n| self.years[year - 1].get(n).map_or(0.0, |e| e.ngo as f64))
            .collect()
    }

    /// Rows of `year,type,builds,retirements,ngo`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,type,builds,retirements,ngo\n");
        for (t, year) in self.years.iter().enumerate() {
            for (name, e) in year {
                writeln!(out, "{},{name},{},{},{}", t + 1, e.builds, e.retirements, e.ngo).unwrap();
            }
        }
        out
    }

    pub fn objective_report(&self) -> String {
        let b = &self.breakdown;
        let mut out = String::new();
        for (k, v) in [
            ("objective", self.objective),
            ("capital", b.capital),
            ("fixed_om", b.fixed_om),
            ("variable_carbon", b.variable_carbon),
            ("unserved", b.unserved),
            ("investment_total", b.investment()),
            ("operational_total", b.operational()),
        ] {
            writeln!(out, "{k} = {}", format_number(v)).unwrap();
        }
        out
    }
}

impl GepModel {
    /// Reads a plan and its cost breakdown from a solution vector.
    pub fn extract_plan(&self, x: &[f64]) -> Plan {
        let count = |v: Option<VarId>| v.map_or(0, |v| x[v.0].round().max(0.0) as u32);
        let years = (0..self.ngo.len())
            .map(|t| {
                self.type_names
                    .iter()
                    .enumerate()
                    .map(|(i, name)| {
                        (
                            name.clone(),
                            PlanEntry {
                                builds: count(self.builds[t][i]),
                                retirements: count(self.retirements[t][i]),
                                ngo: count(Some(self.ngo[t][i])),
                            },
                        )
                    })
                    .collect()
            })
            .collect();
        let mut b = CostBreakdown::default();
        for ((v, tag), xi) in self.model.vars.iter().zip(&self.tags).zip(x) {
            let c = v.cost * xi;
            match tag {
                CostTag::Capital => b.capital += c,
                CostTag::FixedOm => b.fixed_om += c,
                CostTag::VariableCarbon => b.variable_carbon += c,
                CostTag::Unserved => b.unserved += c,
                CostTag::None => {}
            }
        }
        Plan {
            years,
            breakdown: b,
            objective: self.model.objective_value(x),
        }
    }

    /// Solves the model; a node-limit stop with an incumbent is accepted with a warning.
    pub fn solve(&self, solver: &SolverConfig) -> Result<(MilpSolution, Plan)> {
        let tol = Tolerances {
            gap: solver.gap,
            ..Tolerances::default()
        };
        let s = solve_milp_with(&self.model, solver.node_limit, &tol);
        match s.status {
            MilpStatus::Optimal => {}
            MilpStatus::NodeLimit if s.has_solution() => {
                log::warn!("{}: node limit reached, gap {:.3e}", self.model.name, s.gap);
            }
            MilpStatus::NodeLimit => {
                return Err(Error::SolverLimit(format!(
                    "{}: no integer solution within {} nodes",
                    self.model.name, solver.node_limit
                )))
            }
            MilpStatus::Infeasible => return Err(Error::Infeasible(self.model.name.clone())),
            MilpStatus::Unbounded => {
                return Err(Error::SolverLimit(format!(
                    "{}: relaxation is unbounded",
                    self.model.name
                )))
            }
        }
        let plan = self.extract_plan(&s.x);
        Ok((s, plan))
    }
}

/// Simulates every year of `plan` against the grown load.
pub fn evaluate_plan_lolh(
    plan: &Plan,
    fleet: &Fleet,
    base_load: &HourlySeries,
    horizon: &PlanningHorizon,
    profiles: &ProfileMap,
    cfg: &AdequacyConfig,
) -> Result<Vec<ReliabilityResult>> {
    (1..=plan.num_years())
        .map(|t| {
            let load = scale_demand(base_load, horizon, t)?;
            simulate_lolh(fleet, &plan.mix(t), &load, profiles, cfg)
        })
        .collect()
}

pub fn write_plan(plan: &Plan, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("plan.csv", plan.to_csv())?;
    write("objective.txt", plan.objective_report())?;
    write(
        "plan.json",
        serde_json::to_string_pretty(plan).expect("plan serializes") + "\n",
    )
}

pub fn read_plan(dir: impl AsRef<Path>) -> Result<Plan> {
    let p = dir.as_ref().join("plan.json");
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: p.clone(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Margin-variant expansion model paired with a derated adequacy check.
pub struct GepMarginSolver<'a> {
    pub fleet: &'a Fleet,
    pub base_load: &'a HourlySeries,
    pub profiles: &'a ProfileMap,
    pub config: GepConfig,
    pub solver: SolverConfig,
    pub adequacy: AdequacyConfig,
}

impl GepMarginSolver<'_> {
    pub fn solve_plan(&self, margins: &[f64]) -> Result<Plan> {
        let cfg = GepConfig {
            reserve_margins: margins.to_vec(),
            ..self.config.clone()
        };
        let model = build_gep_rm(self.fleet, self.base_load, self.profiles, &cfg)?;
        Ok(model.solve(&self.solver)?.1)
    }
}

impl MarginSolver for GepMarginSolver<'_> {
    fn num_years(&self) -> usize {
        self.config.horizon.num_years
    }

    fn solve(&self, margins: &[f64]) -> Result<Vec<GenerationMix>> {
        Ok(self.solve_plan(margins)?.mixes())
    }

    fn lolh(&self, mixes: &[GenerationMix]) -> Result<Vec<f64>> {
        mixes
            .iter()
            .map(|mix| {
                let load = scale_demand(self.base_load, &self.config.horizon, mix.year)?;
                Ok(simulate_lolh(self.fleet, mix, &load, self.profiles, &self.adequacy)?.lolh)
            })
            .collect()
    }
}
