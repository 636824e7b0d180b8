//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{solve_lp_with_bounds, LpStatus};
use super::{MilpModel, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best integer solution found (empty when none).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Relative gap between incumbent and best remaining bound.
    pub gap: f64,
    pub nodes_explored: usize,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        !self.x.is_empty()
    }
}

struct Node {
    bound: f64,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves `model` with default tolerances.
pub fn solve_milp(model: &MilpModel, node_limit: usize, gap_tol: f64) -> MilpSolution {
    let tol = Tolerances {
        gap: gap_tol,
        ..Tolerances::default()
    };
    solve_milp_with(model, node_limit, &tol)
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

pub fn solve_milp_with(model: &MilpModel, node_limit: usize, tol: &Tolerances) -> MilpSolution {
    let integral: Vec<bool> = model.vars.iter().map(|v| v.kind.is_integral()).collect();
    let mut root_lo: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let mut root_up: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    for j in 0..model.num_vars() {
        if integral[j] {
            root_lo[j] = (root_lo[j] - tol.integrality).ceil();
            root_up[j] = (root_up[j] + tol.integrality).floor();
        }
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        lower: root_lo,
        upper: root_up,
    });
    next_id += 1;

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if relative_gap(*inc, node.bound) <= tol.gap {
                // best-first: every remaining node is at least as bad
                heap.clear();
                break;
            }
        }
        if nodes >= node_limit {
            heap.push(node);
            break;
        }
        nodes += 1;
        let lp = solve_lp_with_bounds(model, &node.lower, &node.upper, tol);
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return MilpSolution {
                    status: MilpStatus::Unbounded,
                    x: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    gap: f64::INFINITY,
                    nodes_explored: nodes,
                };
            }
            LpStatus::IterationLimit => {
                log::warn!("LP iteration limit at node {}; node discarded", node.id);
                continue;
            }
            LpStatus::Optimal => {}
        }
        if let Some((inc, _)) = &incumbent {
            if relative_gap(*inc, lp.objective) <= tol.gap {
                continue;
            }
        }

        // most fractional, ties to the lowest index
        let mut branch: Option<(usize, f64)> = None;
        for (j, &xj) in lp.x.iter().enumerate() {
            if !integral[j] {
                continue;
            }
            let frac = xj - xj.floor();
            if frac <= tol.integrality || frac >= 1.0 - tol.integrality {
                continue;
            }
            let score = (frac - 0.5).abs();
            if branch.is_none_or(|(_, s)| score < s) {
                branch = Some((j, score));
            }
        }

        match branch {
            None => {
                let mut x = lp.x.clone();
                for (j, xj) in x.iter_mut().enumerate() {
                    if integral[j] {
                        *xj = xj.round();
                    }
                }
                let obj = model.objective_value(&x);
                if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                    incumbent = Some((obj, x));
                }
            }
            Some((j, _)) => {
                let v = lp.x[j];
                let mut down_up = node.upper.clone();
                down_up[j] = v.floor();
                let mut up_lo = node.lower.clone();
                up_lo[j] = v.ceil();
                heap.push(Node {
                    bound: lp.objective,
                    id: next_id,
                    lower: node.lower.clone(),
                    upper: down_up,
                });
                heap.push(Node {
                    bound: lp.objective,
                    id: next_id + 1,
                    lower: up_lo,
                    upper: node.upper,
                });
                next_id += 2;
            }
        }
    }

    let best_open = heap.peek().map(|n| n.bound);
    match incumbent {
        Some((obj, x)) => {
            let (status, gap) = match best_open {
                Some(b) if relative_gap(obj, b) > tol.gap => (MilpStatus::NodeLimit, relative_gap(obj, b)),
                _ => (MilpStatus::Optimal, 0.0),
            };
            MilpSolution {
                status,
                x,
                objective: obj,
                gap,
                nodes_explored: nodes,
            }
        }
        None => MilpSolution {
            status: if best_open.is_some() {
                MilpStatus::NodeLimit
            } else {
                MilpStatus::Infeasible
            },
            x: Vec::new(),
            objective: f64::INFINITY,
            gap: f64::INFINITY,
            nodes_explored: nodes,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;

    #[test]
    fn integral_root_needs_no_branching() {
        let mut m = MilpModel::new("t");
        let x = m.add_integer("x", 0.0, 10.0, 1.0);
        m.add_row("r", [(x, 1.0)], Sense::Ge, 3.0);
        let s = solve_milp(&m, 1000, 1e-6);
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.x, vec![3.0]);
        assert_eq!(s.nodes_explored, 1);
    }

    #[test]
    fn small_knapsack_matches_enumeration() {
        // max 5a + 4b, 3a + 2b <= 4, binaries
        let mut m = MilpModel::new("k");
        let a = m.add_binary("a", -5.0);
        let b = m.add_binary("b", -4.0);
        m.add_row("cap", [(a, 3.0), (b, 2.0)], Sense::Le, 4.0);
        let mut best = f64::INFINITY;
        for av in 0..2 {
            for bv in 0..2 {
                if 3 * av + 2 * bv <= 4 {
                    best = best.min(-(5 * av + 4 * bv) as f64);
                }
            }
        }
        let s = solve_milp(&m, 1000, 1e-6);
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.objective, best);
        assert_eq!(s.objective, -5.0);
        assert_eq!(s.x, vec![1.0, 0.0]);
    }

    #[test]
    fn infeasible_integer_program() {
        let mut m = MilpModel::new("t");
        let x = m.add_integer("x", 0.0, 5.0, 1.0);
        m.add_row("a", [(x, 2.0)], Sense::Eq, 3.0);
        let s = solve_milp(&m, 1000, 1e-6);
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_status() {
        let mut m = MilpModel::new("t");
        let vars: Vec<_> = (0..6).map(|i| m.add_integer(format!("x{i}"), 0.0, 3.0, -1.0)).collect();
        m.add_row("r", vars.iter().map(|&v| (v, 2.0)), Sense::Le, 7.0);
        let s = solve_milp(&m, 1, 1e-6);
        assert_eq!(s.status, MilpStatus::NodeLimit);
        assert_eq!(s.nodes_explored, 1);
    }
}
