mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvc_gep::milp::{solve_lp, solve_milp, LpStatus, MilpModel, MilpStatus, Sense, VarId};

fn check_against_enumeration(seed: u64) -> Result<(), TestCaseError> {
    let m = common::random_milp(seed);
    let s = solve_milp(&m, 1_000_000, 1e-9);
    match common::brute_force(&m) {
        None => prop_assert_eq!(s.status, MilpStatus::Infeasible, "seed {}", seed),
        Some(best) => {
            prop_assert_eq!(s.status, MilpStatus::Optimal, "seed {}", seed);
            prop_assert!(
                (s.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
                "seed {seed}: solver {} vs enumeration {best}",
                s.objective
            );
            prop_assert!(m.max_violation(&s.x) <= 1e-6);
        }
    }
    Ok(())
}

/// Bounded LP with a feasible anchor point and random row senses.
fn random_lp(seed: u64) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MilpModel::new("lp");
    let n = rng.gen_range(1..=6);
    let anchor: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for (j, a) in anchor.iter().enumerate() {
        let lo = a - rng.gen_range(0.0..3.0);
        let up = a + rng.gen_range(0.0..3.0);
        m.add_continuous(format!("x{j}"), lo, up, rng.gen_range(-3.0..3.0));
    }
    for i in 0..rng.gen_range(1..=5) {
        let coeffs: Vec<(VarId, f64)> = (0..n).map(|j| (VarId(j), rng.gen_range(-2.0..2.0))).collect();
        let act: f64 = coeffs.iter().map(|(v, c)| c * anchor[v.0]).sum();
        let (sense, rhs) = match rng.gen_range(0..3) {
            0 => (Sense::Le, act + rng.gen_range(0.0..1.0)),
            1 => (Sense::Ge, act - rng.gen_range(0.0..1.0)),
            _ => (Sense::Eq, act),
        };
        m.add_row(format!("r{i}"), coeffs, sense, rhs);
    }
    m
}

/// Lagrangian bound `yᵀb + Σ min over the box of (c - yᵀA)_j x_j`.
fn dual_bound(m: &MilpModel, y: &[f64]) -> f64 {
    let mut d: Vec<f64> = m.vars.iter().map(|v| v.cost).collect();
    for (row, yi) in m.rows.iter().zip(y) {
        for (v, a) in &row.coeffs {
            d[v.0] -= yi * a;
        }
    }
    let yb: f64 = m.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum();
    yb + m.objective_constant
        + d.iter()
            .zip(&m.vars)
            .map(|(dj, v)| if *dj >= 0.0 { dj * v.lower } else { dj * v.upper })
            .sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn milp_matches_enumeration(seed in any::<u64>()) {
        check_against_enumeration(seed)?;
    }

    #[test]
    fn lp_duals_close_the_gap(seed in any::<u64>()) {
        let m = random_lp(seed);
        let s = solve_lp(&m);
        prop_assert_eq!(s.status, LpStatus::Optimal);
        for (row, y) in m.rows.iter().zip(&s.duals) {
            match row.sense {
                Sense::Le => prop_assert!(*y <= 1e-9, "<= row with dual {y}"),
                Sense::Ge => prop_assert!(*y >= -1e-9, ">= row with dual {y}"),
                Sense::Eq => {}
            }
        }
        let bound = dual_bound(&m, &s.duals);
        let scale = s.objective.abs().max(1.0);
        prop_assert!(bound <= s.objective + 1e-6 * scale, "weak duality: {bound} > {}", s.objective);
        prop_assert!((bound - s.objective).abs() <= 1e-6 * scale, "gap {bound} vs {}", s.objective);
    }

    #[test]
    fn solving_twice_is_identical(seed in any::<u64>()) {
        let m = common::random_milp(seed);
        let a = solve_milp(&m, 100_000, 1e-9);
        let b = solve_milp(&m, 100_000, 1e-9);
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.nodes_explored, b.nodes_explored);
        prop_assert_eq!(a.x, b.x);
    }
}

#[test]
fn binary_knapsack() {
    let mut m = MilpModel::new("knapsack");
    let a = m.add_binary("a", -5.0);
    let b = m.add_binary("b", -4.0);
    m.add_row("cap", [(a, 3.0), (b, 2.0)], Sense::Le, 4.0);
    let s = solve_milp(&m, 100, 1e-9);
    assert_eq!(s.status, MilpStatus::Optimal);
    assert_eq!(s.objective, -5.0);
    assert_eq!(s.x, vec![1.0, 0.0]);
}

#[test]
fn integral_relaxation_needs_no_branching() {
    let mut m = MilpModel::new("integral");
    let x = m.add_integer("x", 2.0, 7.0, 1.0);
    let y = m.add_integer("y", 0.0, 7.0, 1.0);
    m.add_row("cover", [(x, 1.0), (y, 1.0)], Sense::Ge, 5.0);
    let s = solve_milp(&m, 100, 1e-9);
    assert_eq!(s.status, MilpStatus::Optimal);
    assert_eq!(s.objective, 5.0);
    assert_eq!(s.nodes_explored, 1);
}
