//! Sparse mixed-integer linear models and a self-contained solver.
//!
//! [`solve_lp`] is a bounded-variable primal simplex over an explicit dense
//! basis inverse; [`solve_milp`] runs best-first branch-and-bound on top of
//! it. Both are meant for desk-scale models (a few thousand columns at most).
//! Larger models can be exported with [`write_mps`] and handed to an external
//! solver.

mod bnb;
mod mps;
mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bnb::{solve_milp, solve_milp_with, MilpSolution, MilpStatus};
pub use mps::{format_number, mps_string, write_mps, write_solution_csv};
pub use simplex::{solve_lp, solve_lp_with_bounds, LpSolution, LpStatus};

/// Numerical tolerances shared by the LP and MILP solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility on rows and bounds.
    pub feasibility: f64,
    /// Distance from an integer below which a value counts as integral.
    pub integrality: f64,
    /// Relative optimality gap for branch-and-bound.
    pub gap: f64,
    /// Reduced-cost threshold for pricing.
    pub optimality: f64,
    /// Smallest pivot magnitude accepted by the ratio test.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            integrality: 1e-6,
            gap: 1e-6,
            optimality: 1e-9,
            pivot: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Objective coefficient.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization MILP with sparse rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective_constant: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind, cost: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            cost,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous, cost)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Integer, cost)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary, cost)
    }

    /// Adds a row; repeated variables in `coeffs` are merged and zeros dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> RowId {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in coeffs {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            name: name.into(),
            coeffs: merged,
            sense,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.vars[id.0]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum::<f64>()
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.kind.is_integral())
    }

    /// Checks index validity, bound ordering and binary domains.
    pub fn validate(&self) -> crate::Result<()> {
        for v in &self.vars {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(crate::Error::invariant(
                    v.name.clone(),
                    format!("lower bound {} exceeds upper bound {}", v.lower, v.upper),
                ));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(crate::Error::invariant(v.name.clone(), "binary bounds outside [0, 1]"));
            }
        }
        for r in &self.rows {
            if let Some((v, _)) = r.coeffs.iter().find(|(v, _)| v.0 >= self.vars.len()) {
                return Err(crate::Error::invariant(
                    r.name.clone(),
                    format!("column index {} out of range", v.0),
                ));
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Copy with every integrality requirement dropped.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_row_merges_duplicates() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 1.0, 0.0);
        let y = m.add_continuous("y", 0.0, 1.0, 0.0);
        m.add_row("r", [(x, 1.0), (y, 2.0), (x, -1.0)], Sense::Le, 1.0);
        assert_eq!(m.rows[0].coeffs, vec![(y, 2.0)]);
    }

    #[test]
    fn validate_catches_bad_bounds() {
        let mut m = MilpModel::new("t");
        m.add_continuous("x", 2.0, 1.0, 0.0);
        assert!(m.validate().is_err());
        let mut m = MilpModel::new("t");
        m.add_row("r", [(VarId(3), 1.0)], Sense::Le, 1.0);
        assert!(m.validate().is_err());
    }
}
