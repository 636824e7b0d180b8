//! Split objectives for a single tree node.
//!
//! Each sample belongs to the right child with probability
//! `p = sigmoid(w·x + b)` and to the left child otherwise. The split loss is
//! the weighted class entropy of the two soft children, normalized by the
//! node's total weight. A small constant is added to every class mass so the
//! logarithms stay finite when a child is pure or empty.

/// Added to per-class child masses before taking logarithms.
pub const MASS_EPSILON: f64 = 1e-9;

/// Samples reaching a node, in scaled feature space.
pub struct NodeData<'a> {
    /// Row-major `n x d` features.
    pub x: &'a [f64],
    pub y: &'a [u8],
    pub weight: &'a [f64],
    pub dim: usize,
}

impl NodeData<'_> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Linear score `w·x_i + b` with `theta = (w, b)`.
    pub fn score(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.dim;
        self.row(i).iter().zip(&theta[..d]).map(|(a, b)| a * b).sum::<f64>() + theta[d]
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn xlnx(v: f64) -> f64 {
    v * v.ln()
}

/// Soft-split entropy and its gradient with respect to `theta = (w, b)`.
pub fn split_entropy(data: &NodeData<'_>, theta: &[f64], grad: &mut [f64]) -> f64 {
    let d = data.dim;
    let mut right = [0.0f64; 2];
    let mut left = [0.0f64; 2];
    // d(right mass of class c) / d(theta)
    let mut dright = vec![[0.0f64; 2]; d + 1];
    for i in 0..data.len() {
        let s = data.weight[i];
        if s == 0.0 {
            continue;
        }
        let p = sigmoid(data.score(theta, i));
        let c = data.y[i] as usize;
        right[c] += s * p;
        left[c] += s * (1.0 - p);
        let slope = s * p * (1.0 - p);
        for (j, xj) in data.row(i).iter().enumerate() {
            dright[j][c] += slope * xj;
        }
        dright[d][c] += slope;
    }
    let total = data.total_weight();
    let r = [right[0] + MASS_EPSILON, right[1] + MASS_EPSILON];
    let l = [left[0] + MASS_EPSILON, left[1] + MASS_EPSILON];
    let (rs, ls) = (r[0] + r[1], l[0] + l[1]);
    let f = (xlnx(rs) - xlnx(r[0]) - xlnx(r[1]) + xlnx(ls) - xlnx(l[0]) - xlnx(l[1])) / total;
    let coef = [
        ((rs / r[0]).ln() - (ls / l[0]).ln()) / total,
        ((rs / r[1]).ln() - (ls / l[1]).ln()) / total,
    ];
    for (gj, dr) in grad.iter_mut().zip(&dright) {
        *gj = dr[0] * coef[0] + dr[1] * coef[1];
    }
    f
}

/// Weighted mean logistic cross-entropy plus a small ridge on `w`.
pub fn logistic_loss(data: &NodeData<'_>, theta: &[f64], grad: &mut [f64], ridge: f64) -> f64 {
    let d = data.dim;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut f = 0.0;
    for i in 0..data.len() {
        let s = data.weight[i];
        if s == 0.0 {
            continue;
        }
        let z = data.score(theta, i);
        let y = data.y[i] as f64;
        // log(1 + e^z) - y z, computed stably
        f += s * (z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z);
        let r = s * (sigmoid(z) - y);
        for (j, xj) in data.row(i).iter().enumerate() {
            grad[j] += r * xj;
        }
        grad[d] += r;
    }
    let total = data.total_weight();
    f /= total;
    grad.iter_mut().for_each(|g| *g /= total);
    for j in 0..d {
        f += 0.5 * ridge * theta[j] * theta[j];
        grad[j] += ridge * theta[j];
    }
    f
}

/// Weighted entropy of the hard split `w·x + b >= 0`, normalized by node weight.
pub fn hard_split_entropy(data: &NodeData<'_>, theta: &[f64]) -> f64 {
    let mut right = [0.0f64; 2];
    let mut left = [0.0f64; 2];
    for i in 0..data.len() {
        let c = data.y[i] as usize;
        if data.score(theta, i) >= 0.0 {
            right[c] += data.weight[i];
        } else {
            left[c] += data.weight[i];
        }
    }
    let part = |m: [f64; 2]| {
        let t = m[0] + m[1];
        if t == 0.0 {
            return 0.0;
        }
        -m.iter().filter(|&&v| v > 0.0).map(|&v| v * (v / t).ln()).sum::<f64>()
    };
    (part(right) + part(left)) / data.total_weight()
}
