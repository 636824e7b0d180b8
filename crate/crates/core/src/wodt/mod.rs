//! Weighted oblique decision trees.
//!
//! Every internal node splits on a hyperplane `w·x + b >= 0` (right) in
//! features scaled to `[0, 1]` by the feature box. Split parameters minimize
//! the class entropy of soft children, where each sample goes right with
//! probability `sigmoid(w·x + b)`, using L-BFGS from a logistic-regression
//! warm start and a few seeded random starts. Samples are then routed by
//! the hard split. Leaves labeled `1` become the polyhedral regions of a
//! [`Disjunction`](crate::hull::Disjunction).

mod lbfgs;
pub mod loss;
mod tree;

pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsResult};
pub use tree::{
    extract_feasible_regions, predict, read_tree, scaling_from_bounds, train_wodt, write_tree, FeatureScaling,
    ObliqueNode, ObliqueTree, WodtConfig, TREE_FORMAT_VERSION,
};
