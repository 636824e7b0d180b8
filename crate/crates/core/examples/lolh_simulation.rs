//! Loss-of-load hours of a small thermal fleet, derated and by Monte Carlo.
//!
//! ```text
//! cargo run --example lolh_simulation
//! ```

use rvc_gep::adequacy::{label_sample, simulate_lolh, AdequacyConfig};
use rvc_gep::fleet::{Category, Fleet, GenerationMix, GeneratorType, HourlySeries, ProfileMap, SeriesKind};

fn thermal(name: &str, mw: f64, outage: f64) -> GeneratorType {
    GeneratorType {
        name: name.into(),
        category: Category::New,
        unit_capacity_mw: mw,
        forced_outage_rate: outage,
        is_renewable: false,
        profile_ref: None,
        capital_cost: 0.0,
        fixed_om_cost: 0.0,
        variable_cost: 0.0,
        co2_rate: 0.0,
        initial_units: 0,
        lifetime_expiry_year: None,
    }
}

fn main() -> rvc_gep::Result<()> {
    let fleet = Fleet::new(vec![thermal("ct", 40.0, 0.05), thermal("cc", 100.0, 0.08)])?;
    let load: Vec<f64> = (0..24)
        .map(|h| 250.0 + 120.0 * (std::f64::consts::PI * (h as f64 - 6.0) / 12.0).sin().max(0.0))
        .collect();
    let load = HourlySeries::new("load", SeriesKind::LoadMw, load)?;
    let profiles = ProfileMap::new();

    println!(
        "{:>4} {:>4} {:>10} {:>12} {:>8}",
        "ct", "cc", "derated", "monte carlo", "label"
    );
    for (ct, cc) in [(2, 3), (3, 3), (2, 4), (4, 4)] {
        let mix = GenerationMix::new(1).with("ct", ct).with("cc", cc);
        let derated = AdequacyConfig::default();
        let d = simulate_lolh(&fleet, &mix, &load, &profiles, &derated)?;
        let mc = simulate_lolh(&fleet, &mix, &load, &profiles, &AdequacyConfig::monte_carlo(20_000, 1))?;
        println!(
            "{ct:>4} {cc:>4} {:>10.1} {:>7.3}±{:<5.3} {:>5}",
            d.lolh,
            mc.lolh,
            mc.lolh_std_error,
            label_sample(&d, &derated)
        );
    }
    Ok(())
}
