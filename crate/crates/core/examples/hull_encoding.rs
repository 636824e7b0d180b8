//! Encodes a union of two polyhedra as a convex-hull MILP and minimizes a
//! cost over it.
//!
//! ```text
//! cargo run --example hull_encoding
//! ```

use rvc_gep::hull::{check_membership, encode_disjunction, Disjunction, Region};
use rvc_gep::milp::{mps_string, solve_milp, MilpModel, Sense};

fn main() -> rvc_gep::Result<()> {
    // two ways of being reliable: many small units, or a few large ones
    let disj = Disjunction {
        year: 1,
        feature_names: vec!["small".into(), "large".into()],
        lower: vec![0.0, 0.0],
        upper: vec![20.0, 8.0],
        regions: vec![
            Region {
                rows: vec![vec![-1.0, 0.0], vec![0.0, 1.0]],
                rhs: vec![-14.0, 2.0],
            },
            Region {
                rows: vec![vec![-1.0, -3.0]],
                rhs: vec![-15.0],
            },
        ],
    };
    disj.validate()?;

    let mut m = MilpModel::new("hull_demo");
    let small = m.add_integer("small", 0.0, 20.0, 1.0);
    let large = m.add_integer("large", 0.0, 8.0, 3.5);
    let enc = encode_disjunction(&mut m, &disj, &[small, large])?;
    m.add_row("budget", [(small, 1.0), (large, 1.0)], Sense::Le, 12.0);
    println!(
        "encoding added {} columns and {} rows",
        enc.vars_added(),
        enc.rows_added()
    );

    let s = solve_milp(&m, 10_000, 1e-9);
    let x = [s.x[small.0], s.x[large.0]];
    println!(
        "status {:?}, cost {}, small {} large {}",
        s.status, s.objective, x[0], x[1]
    );
    println!(
        "member: {}, active region: {:?}",
        check_membership(&disj, &x),
        enc.active_region(&s.x)
    );
    println!("\n{}", mps_string(&m));
    Ok(())
}
