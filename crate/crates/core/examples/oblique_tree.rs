//! Trains an oblique tree on a labeled integer grid and prints the feasible
//! polyhedra read off its reliable leaves.
//!
//! ```text
//! cargo run --example oblique_tree
//! ```

use indexmap::IndexMap;
use rvc_gep::hull::check_membership;
use rvc_gep::sampler::{enumerate_grid, Dataset, LabeledSample, SamplerConfig};
use rvc_gep::sweep::{FeatureBounds, FeatureRange};
use rvc_gep::wodt::{extract_feasible_regions, predict, train_wodt, WodtConfig};

fn main() -> rvc_gep::Result<()> {
    let range = |upper| FeatureRange {
        lower: 0,
        upper,
        sweep_min: 0,
        sweep_max: upper as u32,
    };
    let bounds = FeatureBounds {
        year: 1,
        features: IndexMap::from([("ct".to_string(), range(30)), ("cc".to_string(), range(12))]),
    };
    let sampler = SamplerConfig::default();

    // reliable when there is enough capacity overall and at least a few large units
    let samples: Vec<LabeledSample> = enumerate_grid(&bounds, &sampler)?
        .into_iter()
        .map(|x| {
            let firm = 40.0 * x[0] as f64 + 100.0 * x[1] as f64;
            let label = u8::from(firm >= 900.0 && x[1] >= 3);
            LabeledSample { x, lolh: 0.0, label }
        })
        .collect();
    let ds = Dataset {
        year: 1,
        feature_names: bounds.names(),
        bounds: bounds.clone(),
        samples,
        sampler,
    };

    let tree = train_wodt(&ds, &WodtConfig::default())?;
    println!(
        "{} samples, depth {}, {} leaves, train accuracy {:.4}",
        ds.len(),
        tree.depth(),
        tree.num_leaves(),
        tree.train_accuracy
    );

    let disj = extract_feasible_regions(&tree, &bounds)?;
    for (k, r) in disj.regions.iter().enumerate() {
        println!("region {k}:");
        for (row, rhs) in r.rows.iter().zip(&r.rhs) {
            println!("  {:+.4} ct {:+.4} cc <= {:.4}", row[0], row[1], rhs);
        }
    }
    let agree = ds
        .samples
        .iter()
        .filter(|s| {
            let x: Vec<f64> = s.x.iter().map(|&v| v as f64).collect();
            check_membership(&disj, &x) == (predict(&tree, &x) == 1)
        })
        .count();
    println!("membership agrees with the tree on {agree} of {} points", ds.len());
    Ok(())
}
