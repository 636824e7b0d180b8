//! Reserve-margin sweep on a two-year toy system, followed by the feature
//! partition and the relaxed sampling box of each year.
//!
//! ```text
//! cargo run --example margin_sweep
//! ```

use rvc_gep::adequacy::AdequacyConfig;
use rvc_gep::fleet::{Category, Fleet, GeneratorType, HourlySeries, PlanningHorizon, ProfileMap, SeriesKind};
use rvc_gep::gep::{GepConfig, GepMarginSolver, SolverConfig};
use rvc_gep::sweep::{
    compute_feature_bounds, partition_feature_types, run_margin_sweep, RelaxationConfig, SweepConfig,
};

fn unit(
    name: &str,
    category: Category,
    mw: f64,
    outage: f64,
    capital: f64,
    fom: f64,
    var: f64,
    initial: u32,
) -> GeneratorType {
    GeneratorType {
        name: name.into(),
        category,
        unit_capacity_mw: mw,
        forced_outage_rate: outage,
        is_renewable: false,
        profile_ref: None,
        capital_cost: capital,
        fixed_om_cost: fom,
        variable_cost: var,
        co2_rate: 0.5,
        initial_units: initial,
        lifetime_expiry_year: None,
    }
}

fn main() -> rvc_gep::Result<()> {
    let fleet = Fleet::new(vec![
        unit("peaker", Category::New, 25.0, 0.1, 1.0, 0.1, 0.00008, 0),
        unit("base", Category::New, 50.0, 0.05, 3.0, 0.2, 0.00003, 0),
        unit("old", Category::Old, 20.0, 0.08, 0.0, 0.15, 0.00005, 2),
    ])?;
    let load: Vec<f64> = (0..24)
        .map(|h| if (16..22).contains(&h) { 150.0 } else { 100.0 })
        .collect();
    let load = HourlySeries::new("load", SeriesKind::LoadMw, load)?;
    let profiles = ProfileMap::new();

    let mut gep = GepConfig::new(PlanningHorizon::new(2, 0.02), 0.01);
    gep.representative_hours = Some(vec![3, 18]);
    gep.hour_weight = Some(12.0);
    let solver = GepMarginSolver {
        fleet: &fleet,
        base_load: &load,
        profiles: &profiles,
        config: gep,
        solver: SolverConfig::default(),
        adequacy: AdequacyConfig::default(),
    };
    let outcome = run_margin_sweep(&fleet, &SweepConfig::default(), &solver)?;
    for s in &outcome.steps {
        println!(
            "step {:.2}: {} iterations, margins {:?}, LOLH {:?}",
            s.step, s.iterations, s.margins, s.lolh
        );
    }

    let partitions = partition_feature_types(&outcome.matrices, &fleet, 0.01)?;
    let bounds = compute_feature_bounds(&outcome.matrices, &partitions, &RelaxationConfig::uniform(1.0, 1.0))?;
    for (p, b) in partitions.iter().zip(&bounds) {
        println!("year {}: fixed {:?}", p.year, p.fixed_counts);
        for (name, r) in &b.features {
            println!(
                "  {name}: sweep [{}, {}] -> box [{}, {}]",
                r.sweep_min, r.sweep_max, r.lower, r.upper
            );
        }
    }
    Ok(())
}
