//! Disjunctions of bounded polyhedra and their convex-hull MILP encoding.
//!
//! A [`Disjunction`] is a union of regions `{x : R_k x <= b_k}` intersected
//! with a common feature box. Because every region is bounded by the box,
//! the hull reformulation represents the union exactly: each region gets a
//! binary selector `W_k` and a disaggregated copy `z_k` of the features with
//!
//! ```text
//! sum_k z_k = x
//! sum_k W_k = 1
//! R_k z_k - b_k W_k <= 0
//! lower W_k <= z_k <= upper W_k
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{solve_lp, LpStatus, MilpModel, RowId, Sense, VarId};

/// Absolute tolerance of [`check_membership`].
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Each row is a coefficient vector over the features.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl Region {
    pub fn unconstrained() -> Self {
        Self {
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn satisfies(&self, x: &[f64], tol: f64) -> bool {
        self.rows
            .iter()
            .zip(&self.rhs)
            .all(|(r, b)| r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() <= b + tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disjunction {
    pub year: usize,
    pub feature_names: Vec<String>,
    /// Feature box shared by every region.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub regions: Vec<Region>,
}

impl Disjunction {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn in_box(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, up))| *v >= lo - tol && *v <= up + tol)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.lower.len() != d || self.upper.len() != d {
            return Err(Error::Dimension(format!(
                "box has {}/{} entries for {d} features",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (k, r) in self.regions.iter().enumerate() {
            if r.rows.len() != r.rhs.len() {
                return Err(Error::Dimension(format!(
                    "region {k} has {} rows but {} right-hand sides",
                    r.rows.len(),
                    r.rhs.len()
                )));
            }
            if let Some(row) = r.rows.iter().find(|row| row.len() != d) {
                return Err(Error::Dimension(format!(
                    "region {k} row has {} coefficients, expected {d}",
                    row.len()
                )));
            }
        }
        Ok(())
    }
}

/// Handles to everything [`encode_disjunction`] added to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullEncoding {
    pub year: usize,
    pub x_vars: Vec<VarId>,
    pub w_vars: Vec<VarId>,
    /// `z_vars[k][j]` is feature `j` of region `k`.
    pub z_vars: Vec<Vec<VarId>>,
    pub link_rows: Vec<RowId>,
    pub choice_row: RowId,
    pub region_rows: Vec<Vec<RowId>>,
    /// Upper rows then lower rows, per region and feature.
    pub bound_rows: Vec<RowId>,
}

impl HullEncoding {
    pub fn vars_added(&self) -> usize {
        self.w_vars.len() + self.z_vars.iter().map(Vec::len).sum::<usize>()
    }

    pub fn rows_added(&self) -> usize {
        self.link_rows.len() + 1 + self.region_rows.iter().map(Vec::len).sum::<usize>() + self.bound_rows.len()
    }

    /// Index of the selected region in a solution vector.
    pub fn active_region(&self, x: &[f64]) -> Option<usize> {
        self.w_vars.iter().position(|w| x[w.0] > 0.5)
    }
}

pub fn encode_disjunction(model: &mut MilpModel, disj: &Disjunction, x_vars: &[VarId]) -> Result<HullEncoding> {
    disj.validate()?;
    let d = disj.dim();
    if x_vars.len() != d {
        return Err(Error::Dimension(format!(
            "{} feature variables for a {d}-feature disjunction",
            x_vars.len()
        )));
    }
    if let Some(v) = x_vars.iter().find(|v| v.0 >= model.num_vars()) {
        return Err(Error::Dimension(format!(
            "feature variable {} is not in the model",
            v.0
        )));
    }
    if disj.regions.is_empty() {
        return Err(Error::NoFeasibleRegion { year: disj.year });
    }
    let t = disj.year;
    let n = disj.regions.len();

    let mut w_vars = Vec::with_capacity(n);
    let mut z_vars = Vec::with_capacity(n);
    for k in 0..n {
        w_vars.push(model.add_binary(format!("hull_y{t}_w{k}"), 0.0));
        let z: Vec<VarId> = (0..d)
            .map(|j| {
                let lo = disj.lower[j].min(0.0);
                let up = disj.upper[j].max(0.0);
                model.add_continuous(format!("hull_y{t}_z{k}_{j}"), lo, up, 0.0)
            })
            .collect();
        z_vars.push(z);
    }

    let link_rows = (0..d)
        .map(|j| {
            let coeffs = z_vars.iter().map(|z| (z[j], 1.0)).chain([(x_vars[j], -1.0)]);
            model.add_row(format!("hull_y{t}_link_{j}"), coeffs, Sense::Eq, 0.0)
        })
        .collect();
    let choice_row = model.add_row(
        format!("hull_y{t}_choice"),
        w_vars.iter().map(|&w| (w, 1.0)),
        Sense::Eq,
        1.0,
    );

    let region_rows = disj
        .regions
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.rows
                .iter()
                .zip(&r.rhs)
                .enumerate()
                .map(|(i, (row, &b))| {
                    let coeffs = z_vars[k]
                        .iter()
                        .zip(row)
                        .map(|(&z, &a)| (z, a))
                        .chain([(w_vars[k], -b)]);
                    model.add_row(format!("hull_y{t}_r{k}_{i}"), coeffs, Sense::Le, 0.0)
                })
                .collect()
        })
        .collect();

    let mut bound_rows = Vec::with_capacity(2 * d * n);
    for k in 0..n {
        for j in 0..d {
            bound_rows.push(model.add_row(
                format!("hull_y{t}_ub{k}_{j}"),
                [(z_vars[k][j], 1.0), (w_vars[k], -disj.upper[j])],
                Sense::Le,
                0.0,
            ));
        }
    }
    for k in 0..n {
        for j in 0..d {
            bound_rows.push(model.add_row(
                format!("hull_y{t}_lb{k}_{j}"),
                [(z_vars[k][j], 1.0), (w_vars[k], -disj.lower[j])],
                Sense::Ge,
                0.0,
            ));
        }
    }

    Ok(HullEncoding {
        year: t,
        x_vars: x_vars.to_vec(),
        w_vars,
        z_vars,
        link_rows,
        choice_row,
        region_rows,
        bound_rows,
    })
}

/// True iff `x` lies in the box and in at least one region.
pub fn check_membership(disj: &Disjunction, x: &[f64]) -> bool {
    disj.in_box(x, MEMBERSHIP_TOLERANCE) && disj.regions.iter().any(|r| r.satisfies(x, MEMBERSHIP_TOLERANCE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub index: usize,
    pub rows: usize,
    pub nonempty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub year: usize,
    /// Finite box with `lower <= upper`, so every region is bounded.
    pub bounded: bool,
    pub regions: Vec<RegionReport>,
    pub empty_regions: Vec<usize>,
    pub membership_tolerance: f64,
    pub exact: bool,
}

fn region_nonempty(disj: &Disjunction, region: &Region) -> bool {
    let mut m = MilpModel::new("region");
    let vars: Vec<VarId> = (0..disj.dim())
        .map(|j| m.add_continuous(format!("x{j}"), disj.lower[j], disj.upper[j], 0.0))
        .collect();
    for (i, (row, &b)) in region.rows.iter().zip(&region.rhs).enumerate() {
        m.add_row(
            format!("r{i}"),
            vars.iter().zip(row).map(|(&v, &a)| (v, a)),
            Sense::Le,
            b,
        );
    }
    solve_lp(&m).status == LpStatus::Optimal
}

/// Checks boundedness and finds regions with no point inside the box.
pub fn validate_exactness(disj: &Disjunction) -> ExactnessReport {
    let bounded = disj.lower.len() == disj.dim()
        && disj.upper.len() == disj.dim()
        && disj
            .lower
            .iter()
            .zip(&disj.upper)
            .all(|(lo, up)| lo.is_finite() && up.is_finite() && lo <= up);
    let regions: Vec<RegionReport> = disj
        .regions
        .iter()
        .enumerate()
        .map(|(index, r)| RegionReport {
            index,
            rows: r.num_rows(),
            nonempty: bounded && region_nonempty(disj, r),
        })
        .collect();
    let empty_regions: Vec<usize> = regions.iter().filter(|r| !r.nonempty).map(|r| r.index).collect();
    ExactnessReport {
        year: disj.year,
        bounded,
        exact: bounded,
        regions,
        empty_regions,
        membership_tolerance: MEMBERSHIP_TOLERANCE,
    }
}

/// Drops regions with no point in the box; returns the removed indices.
pub fn prune_empty_regions(disj: &Disjunction) -> (Disjunction, Vec<usize>) {
    let mut kept = disj.clone();
    kept.regions.clear();
    let mut removed = Vec::new();
    for (k, r) in disj.regions.iter().enumerate() {
        if region_nonempty(disj, r) {
            kept.regions.push(r.clone());
        } else {
            log::warn!("year {}: dropping empty region {k}", disj.year);
            removed.push(k);
        }
    }
    (kept, removed)
}

pub fn write_disjunction(disj: &Disjunction, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(disj).expect("disjunction serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_disjunction(path: impl AsRef<Path>) -> Result<Disjunction> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let disj: Disjunction = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    disj.validate()?;
    Ok(disj)
}
