//! Tree growth, hard-path prediction and extraction of reliable regions.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lbfgs::{lbfgs_minimize, LbfgsConfig};
use super::loss::{logistic_loss, split_entropy, NodeData};
use crate::adequacy::derive_seed;
use crate::error::{Error, Result};
use crate::hull::{Disjunction, Region};
use crate::sampler::Dataset;
use crate::sweep::FeatureBounds;

pub const TREE_FORMAT_VERSION: u32 = 1;

/// Subtrees with at least this many samples are grown on separate threads.
const PARALLEL_MIN_SAMPLES: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WodtConfig {
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default)]
    pub lbfgs: LbfgsConfig,
    #[serde(default = "default_min_leaf_weight")]
    pub min_leaf_weight: f64,
    #[serde(default = "default_purity")]
    pub purity_stop: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Ridge penalty of the logistic warm start.
    #[serde(default = "default_ridge")]
    pub logistic_ridge: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_depth() -> usize {
    6
}

fn default_min_leaf_weight() -> f64 {
    2.0
}

fn default_purity() -> f64 {
    0.999
}

fn default_restarts() -> usize {
    3
}

fn default_ridge() -> f64 {
    1e-4
}

impl Default for WodtConfig {
    fn default() -> Self {
        Self {
            max_depth: default_depth(),
            lbfgs: LbfgsConfig::default(),
            min_leaf_weight: default_min_leaf_weight(),
            purity_stop: default_purity(),
            restarts: default_restarts(),
            logistic_ridge: default_ridge(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub offset: f64,
    pub scale: f64,
}

impl FeatureScaling {
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObliqueNode {
    /// Samples with `weights·x_scaled + bias >= 0` go right.
    Internal {
        weights: Vec<f64>,
        bias: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: u8,
        weighted_purity: f64,
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliqueTree {
    pub format_version: u32,
    pub year: usize,
    pub feature_names: Vec<String>,
    pub scaling: Vec<FeatureScaling>,
    pub max_depth: usize,
    pub train_accuracy: f64,
    /// Set when the training data held a single label.
    pub single_label: bool,
    /// Node 0 is the root.
    pub nodes: Vec<ObliqueNode>,
}

impl ObliqueTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[ObliqueNode], i: usize) -> usize {
            match &nodes[i] {
                ObliqueNode::Leaf { .. } => 0,
                ObliqueNode::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, ObliqueNode::Leaf { .. }))
            .count()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scaling).map(|(v, s)| s.apply(*v)).collect()
    }
}

/// Offsets and scales mapping the feature box onto `[0, 1]`.
pub fn scaling_from_bounds(bounds: &FeatureBounds) -> Vec<FeatureScaling> {
    bounds
        .features
        .values()
        .map(|r| {
            let width = (r.upper - r.lower) as f64;
            FeatureScaling {
                offset: r.lower as f64,
                scale: if width > 0.0 { width } else { 1.0 },
            }
        })
        .collect()
}

enum Grown {
    Leaf {
        label: u8,
        purity: f64,
        weight: f64,
    },
    Split {
        theta: Vec<f64>,
        left: Box<Grown>,
        right: Box<Grown>,
    },
}

struct Trainer<'a> {
    x: &'a [f64],
    y: &'a [u8],
    dim: usize,
    cfg: &'a WodtConfig,
}

impl Trainer<'_> {
    fn leaf(&self, idx: &[usize]) -> Grown {
        let ones = idx.iter().filter(|&&i| self.y[i] == 1).count() as f64;
        let total = idx.len() as f64;
        let zeros = total - ones;
        let label = u8::from(ones > zeros);
        let purity = if total > 0.0 { ones.max(zeros) / total } else { 1.0 };
        Grown::Leaf {
            label,
            purity,
            weight: total,
        }
    }

    fn grow(&self, idx: Vec<usize>, depth: usize, node_id: u64) -> Result<Grown> {
        let leaf = self.leaf(&idx);
        let Grown::Leaf { purity, weight, .. } = leaf else {
            unreachable!()
        };
        if depth >= self.cfg.max_depth || purity >= self.cfg.purity_stop || weight < self.cfg.min_leaf_weight {
            return Ok(leaf);
        }
        let Some(theta) = self.fit_split(&idx, node_id)? else {
            return Ok(leaf);
        };
        let d = self.dim;
        let (right, left): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
            let row = &self.x[i * d..(i + 1) * d];
            row.iter().zip(&theta[..d]).map(|(a, b)| a * b).sum::<f64>() + theta[d] >= 0.0
        });
        if left.is_empty() || right.is_empty() {
            return Ok(leaf);
        }
        let (l, r) = if idx.len() >= PARALLEL_MIN_SAMPLES {
            rayon::join(
                || self.grow(left, depth + 1, 2 * node_id),
                || self.grow(right, depth + 1, 2 * node_id + 1),
            )
        } else {
            (
                self.grow(left, depth + 1, 2 * node_id),
                self.grow(right, depth + 1, 2 * node_id + 1),
            )
        };
        Ok(Grown::Split {
            theta,
            left: Box::new(l?),
            right: Box::new(r?),
        })
    }

    /// Best hyperplane `(w, b)` for the samples in `idx`, if any is usable.
    fn fit_split(&self, idx: &[usize], node_id: u64) -> Result<Option<Vec<f64>>> {
        let d = self.dim;
        let mut x = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            x.extend_from_slice(&self.x[i * d..(i + 1) * d]);
        }
        let y: Vec<u8> = idx.iter().map(|&i| self.y[i]).collect();
        let weight = vec![1.0; idx.len()];
        let data = NodeData {
            x: &x,
            y: &y,
            weight: &weight,
            dim: d,
        };

        let mut starts = Vec::with_capacity(self.cfg.restarts + 1);
        let ridge = self.cfg.logistic_ridge;
        let warm = lbfgs_minimize(
            |t, g| logistic_loss(&data, t, g, ridge),
            &vec![0.0; d + 1],
            &self.cfg.lbfgs,
        )?;
        starts.push(warm.x);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, node_id));
        for _ in 0..self.cfg.restarts {
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let anchor = rng.gen_range(0..idx.len());
            let b = -data.row(anchor).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            starts.push(w.into_iter().chain([b]).collect());
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            if start[..d].iter().all(|v| *v == 0.0) {
                continue;
            }
            let r = lbfgs_minimize(|t, g| split_entropy(&data, t, g), &start, &self.cfg.lbfgs)?;
            if r.x[..d].iter().all(|v| *v == 0.0) || !r.f.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(f, _)| r.f < *f) {
                best = Some((r.f, r.x));
            }
        }
        Ok(best.map(|(_, theta)| theta))
    }
}

fn flatten(g: Grown, nodes: &mut Vec<ObliqueNode>) -> usize {
    let at = nodes.len();
    match g {
        Grown::Leaf { label, purity, weight } => nodes.push(ObliqueNode::Leaf {
            label,
            weighted_purity: purity,
            weight,
        }),
        Grown::Split { theta, left, right } => {
            let d = theta.len() - 1;
            nodes.push(ObliqueNode::Internal {
                weights: theta[..d].to_vec(),
                bias: theta[d],
                left: 0,
                right: 0,
            });
            let l = flatten(*left, nodes);
            let r = flatten(*right, nodes);
            if let ObliqueNode::Internal { left, right, .. } = &mut nodes[at] {
                *left = l;
                *right = r;
            }
        }
    }
    at
}

fn walk_scaled(nodes: &[ObliqueNode], xs: &[f64]) -> u8 {
    let mut i = 0;
    loop {
        match &nodes[i] {
            ObliqueNode::Leaf { label, .. } => return *label,
            ObliqueNode::Internal {
                weights,
                bias,
                left,
                right,
            } => {
                let s: f64 = weights.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>() + bias;
                i = if s >= 0.0 { *right } else { *left };
            }
        }
    }
}

/// Hard-path prediction for a feature vector in original units.
pub fn predict(tree: &ObliqueTree, x: &[f64]) -> u8 {
    walk_scaled(&tree.nodes, &tree.scale(x))
}

/// Grows a tree on `ds`, with features scaled to `[0, 1]` by the dataset bounds.
pub fn train_wodt(ds: &Dataset, cfg: &WodtConfig) -> Result<ObliqueTree> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = ds.feature_names.len();
    if ds.bounds.dim() != d {
        return Err(Error::FeatureMismatch {
            year: ds.year,
            expected: ds.feature_names.clone(),
            found: ds.bounds.names(),
        });
    }
    let scaling = scaling_from_bounds(&ds.bounds);
    let mut x = Vec::with_capacity(ds.len() * d);
    for s in &ds.samples {
        if s.x.len() != d {
            return Err(Error::Dimension(format!(
                "sample has {} features, expected {d}",
                s.x.len()
            )));
        }
        x.extend(s.x.iter().zip(&scaling).map(|(v, sc)| sc.apply(*v as f64)));
    }
    let y: Vec<u8> = ds.samples.iter().map(|s| s.label).collect();
    let [zeros, ones] = ds.label_counts();
    let single_label = zeros == 0 || ones == 0;
    if single_label {
        log::warn!("year {}: dataset holds a single label; tree is one leaf", ds.year);
    }

    let trainer = Trainer {
        x: &x,
        y: &y,
        dim: d,
        cfg,
    };
    let grown = trainer.grow((0..ds.len()).collect(), 0, 1)?;
    let mut nodes = Vec::new();
    flatten(grown, &mut nodes);

    let correct = (0..ds.len())
        .filter(|&i| walk_scaled(&nodes, &x[i * d..(i + 1) * d]) == y[i])
        .count();
    Ok(ObliqueTree {
        format_version: TREE_FORMAT_VERSION,
        year: ds.year,
        feature_names: ds.feature_names.clone(),
        scaling,
        max_depth: cfg.max_depth,
        train_accuracy: correct as f64 / ds.len() as f64,
        single_label,
        nodes,
    })
}

/// Hyperplane `w·x_scaled + b` rewritten over original units as `(w', b')`.
fn unscale(weights: &[f64], bias: f64, scaling: &[FeatureScaling]) -> (Vec<f64>, f64) {
    let w: Vec<f64> = weights.iter().zip(scaling).map(|(w, s)| w / s.scale).collect();
    let b = bias
        - weights
            .iter()
            .zip(scaling)
            .map(|(w, s)| w * s.offset / s.scale)
            .sum::<f64>();
    (w, b)
}

/// Row `a·x <= rhs` divided by its largest coefficient magnitude.
fn normalized(a: Vec<f64>, rhs: f64) -> (Vec<f64>, f64) {
    let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        (a.iter().map(|v| v / m).collect(), rhs / m)
    } else {
        (a, rhs)
    }
}

/// Collects the path constraints of every leaf labeled `1`, in original units.
pub fn extract_feasible_regions(tree: &ObliqueTree, bounds: &FeatureBounds) -> Result<Disjunction> {
    let names = bounds.names();
    if names != tree.feature_names {
        return Err(Error::FeatureMismatch {
            year: bounds.year,
            expected: tree.feature_names.clone(),
            found: names,
        });
    }
    let mut regions = Vec::new();
    let mut stack: Vec<(usize, Vec<(Vec<f64>, f64)>)> = vec![(0, Vec::new())];
    while let Some((i, path)) = stack.pop() {
        match &tree.nodes[i] {
            ObliqueNode::Leaf { label, .. } => {
                if *label == 1 {
                    let (rows, rhs) = path.into_iter().unzip();
                    regions.push(Region { rows, rhs });
                }
            }
            ObliqueNode::Internal {
                weights,
                bias,
                left,
                right,
            } => {
                let (w, b) = unscale(weights, *bias, &tree.scaling);
                let mut right_path = path.clone();
                right_path.push(normalized(w.iter().map(|v| -v).collect(), b));
                let mut left_path = path;
                left_path.push(normalized(w, -b));
                // right pushed first so the left subtree is visited first
                stack.push((*right, right_path));
                stack.push((*left, left_path));
            }
        }
    }
    if regions.is_empty() {
        return Err(Error::NoFeasibleRegion { year: bounds.year });
    }
    Ok(Disjunction {
        year: bounds.year,
        feature_names: names,
        lower: bounds.lower(),
        upper: bounds.upper(),
        regions,
    })
}

pub fn write_tree(tree: &ObliqueTree, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(tree).expect("tree serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_tree(path: impl AsRef<Path>) -> Result<ObliqueTree> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tree: ObliqueTree = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if tree.format_version != TREE_FORMAT_VERSION {
        return Err(Error::Parse {
            path: path.into(),
            location: "format_version".into(),
            message: format!("unsupported tree format {}", tree.format_version),
        });
    }
    Ok(tree)
}
