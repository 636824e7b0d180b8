//! Builds a small capacity-planning MILP, solves it by branch and bound and
//! writes it out in MPS form.
//!
//! ```text
//! cargo run --example milp_solve
//! ```

use rvc_gep::milp::{mps_string, solve_lp, solve_milp, MilpModel, Sense};

fn main() {
    let mut m = MilpModel::new("plant_choice");
    // integer unit counts with capital cost; continuous dispatch with fuel cost
    let units = [
        ("ct", 40.0, 6.0, 0.09),
        ("cc", 110.0, 14.0, 0.05),
        ("st", 240.0, 30.0, 0.03),
    ];
    let mut build = Vec::new();
    let mut dispatch = Vec::new();
    for (name, mw, capital, fuel) in units {
        build.push((m.add_integer(format!("build_{name}"), 0.0, 10.0, capital), mw));
        dispatch.push(m.add_continuous(format!("gen_{name}"), 0.0, f64::INFINITY, fuel));
    }
    m.add_row("demand", dispatch.iter().map(|&v| (v, 1.0)), Sense::Ge, 430.0);
    for (i, &(b, mw)) in build.iter().enumerate() {
        m.add_row(format!("cap_{i}"), [(dispatch[i], 1.0), (b, -mw)], Sense::Le, 0.0);
    }
    m.add_row("firm", build.iter().map(|&(b, mw)| (b, mw)), Sense::Ge, 500.0);

    let lp = solve_lp(&m.relaxed());
    println!("relaxation: {:?} {:.4}", lp.status, lp.objective);
    let s = solve_milp(&m, 10_000, 1e-9);
    println!(
        "integer:    {:?} {:.4} after {} nodes",
        s.status, s.objective, s.nodes_explored
    );
    for (v, x) in m.vars.iter().zip(&s.x) {
        println!("  {:<10} {}", v.name, x + 0.0);
    }
    println!("\n{}", mps_string(&m));
}
