//! Bounded-variable primal simplex with an explicit dense basis inverse.
//!
//! Every row gets a slack (`a x + s = rhs`) whose bounds encode the row
//! sense. Rows whose slack cannot absorb the initial residual receive an
//! artificial column that phase 1 drives to zero.

use super::{MilpModel, Sense, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c - yᵀA` the reduced costs.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

const REFACTOR_EVERY: usize = 64;
const STALL_LIMIT: usize = 50;
const DEFAULT_MAX_ITER: usize = 100_000;

/// Solves the continuous relaxation of `model` with its own bounds.
pub fn solve_lp(model: &MilpModel) -> LpSolution {
    let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    solve_lp_with_bounds(model, &lower, &upper, &Tolerances::default())
}

/// Solves the continuous relaxation of `model` with overridden column bounds.
pub fn solve_lp_with_bounds(model: &MilpModel, lower: &[f64], upper: &[f64], tol: &Tolerances) -> LpSolution {
    let n = model.num_vars();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::INFINITY,
            duals: vec![0.0; model.num_rows()],
            reduced_costs: vec![0.0; n],
            iterations: 0,
        };
    }
    let mut s = Simplex::new(model, lower, upper, *tol);
    s.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column sitting at zero.
    Free,
}

enum Step {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    model: &'a MilpModel,
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Column-major inverse: entry (p, r) lives at `r * m + p`.
    binv: Vec<f64>,
    rhs: Vec<f64>,
    tol: Tolerances,
    iterations: usize,
    max_iter: usize,
    since_refactor: usize,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(model: &'a MilpModel, lower: &[f64], upper: &[f64], tol: Tolerances) -> Self {
        let n = model.num_vars();
        let m = model.num_rows();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in model.rows.iter().enumerate() {
            for &(v, a) in &row.coeffs {
                cols[v.0].push((i, a));
            }
        }
        let mut lo = lower.to_vec();
        let mut up = upper.to_vec();
        let mut x = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for j in 0..n {
            let (v, st) = if lo[j].is_finite() {
                (lo[j], State::AtLower)
            } else if up[j].is_finite() {
                (up[j], State::AtUpper)
            } else {
                (0.0, State::Free)
            };
            x.push(v);
            state.push(st);
        }

        let rhs: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();
        let mut residual = rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }

        // slacks
        for (i, row) in model.rows.iter().enumerate() {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            cols.push(vec![(i, 1.0)]);
            lo.push(l);
            up.push(u);
            x.push(0.0);
            state.push(State::AtLower);
        }

        let mut basis = vec![0usize; m];
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let slack = n + i;
            let r = residual[i];
            if r >= lo[slack] && r <= up[slack] {
                x[slack] = r;
                state[slack] = State::Basic;
                basis[i] = slack;
                binv[i * m + i] = 1.0;
            } else {
                let clamped = r.clamp(lo[slack], up[slack]);
                x[slack] = clamped;
                state[slack] = if clamped == lo[slack] {
                    State::AtLower
                } else {
                    State::AtUpper
                };
                let sign = if r > clamped { 1.0 } else { -1.0 };
                let art = cols.len();
                cols.push(vec![(i, sign)]);
                lo.push(0.0);
                up.push(f64::INFINITY);
                x.push((r - clamped).abs());
                state.push(State::Basic);
                basis[i] = art;
                binv[i * m + i] = sign;
            }
        }
        let total = cols.len();
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        Self {
            model,
            m,
            n,
            cols,
            lo,
            up,
            cost,
            x,
            state,
            basis,
            binv,
            rhs,
            tol,
            iterations: 0,
            max_iter: DEFAULT_MAX_ITER,
            since_refactor: 0,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        }
    }

    fn solve(&mut self) -> LpSolution {
        let n_art = self.cols.len() - self.n - self.m;
        if n_art > 0 {
            match self.run() {
                Step::Optimal => {}
                Step::Unbounded | Step::IterationLimit => return self.finish(LpStatus::IterationLimit),
            }
            let infeas: f64 = (self.n + self.m..self.cols.len()).map(|j| self.x[j]).sum();
            if infeas > self.tol.feasibility {
                return self.finish(LpStatus::Infeasible);
            }
            for j in self.n + self.m..self.cols.len() {
                self.lo[j] = 0.0;
                self.up[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.x[j] = 0.0;
                    self.state[j] = State::AtLower;
                }
            }
        }
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        for (j, v) in self.model.vars.iter().enumerate() {
            self.cost[j] = v.cost;
        }
        match self.run() {
            Step::Optimal => self.finish(LpStatus::Optimal),
            Step::Unbounded => self.finish(LpStatus::Unbounded),
            Step::IterationLimit => self.finish(LpStatus::IterationLimit),
        }
    }

    fn finish(&mut self, status: LpStatus) -> LpSolution {
        self.compute_duals();
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let reduced_costs = (0..self.n).map(|j| self.reduced_cost(j)).collect();
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => self.model.objective_value(&x),
        };
        LpSolution {
            status,
            x,
            objective,
            duals: self.y.clone(),
            reduced_costs,
            iterations: self.iterations,
        }
    }

    fn phase_objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        for r in 0..m {
            let col = &self.binv[r * m..(r + 1) * m];
            self.y[r] = self.basis.iter().zip(col).map(|(&b, &v)| self.cost[b] * v).sum();
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(r, a)| self.y[r] * a).sum::<f64>()
    }

    fn run(&mut self) -> Step {
        let mut best = self.phase_objective();
        let mut stalled = 0usize;
        loop {
            if self.iterations >= self.max_iter {
                return Step::IterationLimit;
            }
            let bland = stalled >= STALL_LIMIT;
            self.compute_duals();
            let Some((q, d)) = self.price(bland) else {
                return Step::Optimal;
            };
            self.iterations += 1;
            self.compute_alpha(q);
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let flip = if dir > 0.0 {
                self.up[q] - self.x[q]
            } else {
                self.x[q] - self.lo[q]
            };
            let leave = self.ratio_test(dir, bland);
            let t_pivot = leave.map_or(f64::INFINITY, |(_, t)| t);
            if !flip.is_finite() && !t_pivot.is_finite() {
                return Step::Unbounded;
            }
            if flip <= t_pivot {
                self.shift(q, dir, flip);
                self.state[q] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
            } else {
                let (p, t) = leave.expect("finite pivot step");
                self.shift(q, dir, t);
                let leaving = self.basis[p];
                let rate = -dir * self.alpha[p];
                if rate < 0.0 {
                    self.x[leaving] = self.lo[leaving];
                    self.state[leaving] = State::AtLower;
                } else {
                    self.x[leaving] = self.up[leaving];
                    self.state[leaving] = State::AtUpper;
                }
                self.state[q] = State::Basic;
                self.basis[p] = q;
                self.pivot_inverse(p);
                self.since_refactor += 1;
                if self.since_refactor >= REFACTOR_EVERY {
                    self.refactor();
                }
            }
            let obj = self.phase_objective();
            if obj < best - 1e-12 * (1.0 + best.abs()) {
                best = obj;
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
    }

    /// Dantzig pricing, or Bland's rule when stalled. Ties go to the lowest index.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let opt = self.tol.optimality;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols.len() {
            let st = self.state[j];
            if st == State::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let eligible = match st {
                State::AtLower => d < -opt,
                State::AtUpper => d > opt,
                State::Free => d.abs() > opt,
                State::Basic => false,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if best.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn compute_alpha(&mut self, q: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        for &(r, a) in &self.cols[q] {
            let col = &self.binv[r * m..(r + 1) * m];
            for (al, &b) in self.alpha.iter_mut().zip(col) {
                *al += a * b;
            }
        }
    }

    /// Two-pass (Harris) ratio test; returns the basis position that leaves.
    fn ratio_test(&self, dir: f64, bland: bool) -> Option<(usize, f64)> {
        let piv = self.tol.pivot;
        let relax = if bland { 0.0 } else { 1e-9 };
        let limit = |p: usize, slack: f64| -> Option<f64> {
            let a = self.alpha[p];
            if a.abs() <= piv {
                return None;
            }
            let b = self.basis[p];
            let rate = -dir * a;
            if rate < 0.0 {
                self.lo[b]
                    .is_finite()
                    .then(|| ((self.x[b] - self.lo[b] + slack) / -rate).max(0.0))
            } else {
                self.up[b]
                    .is_finite()
                    .then(|| ((self.up[b] - self.x[b] + slack) / rate).max(0.0))
            }
        };
        let mut bound = f64::INFINITY;
        for p in 0..self.m {
            if let Some(t) = limit(p, relax) {
                bound = bound.min(t);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut chosen: Option<(usize, f64)> = None;
        for p in 0..self.m {
            let Some(t) = limit(p, 0.0) else { continue };
            if t > bound {
                continue;
            }
            chosen = match chosen {
                None => Some((p, t)),
                Some((cp, ct)) => {
                    let better = if bland {
                        t < ct || (t == ct && self.basis[p] < self.basis[cp])
                    } else {
                        let (a, ca) = (self.alpha[p].abs(), self.alpha[cp].abs());
                        a > ca || (a == ca && self.basis[p] < self.basis[cp])
                    };
                    if better {
                        Some((p, t))
                    } else {
                        Some((cp, ct))
                    }
                }
            };
        }
        chosen
    }

    fn shift(&mut self, q: usize, dir: f64, t: f64) {
        if t == 0.0 {
            return;
        }
        self.x[q] += dir * t;
        for p in 0..self.m {
            let b = self.basis[p];
            self.x[b] -= dir * t * self.alpha[p];
        }
    }

    fn pivot_inverse(&mut self, p: usize) {
        let m = self.m;
        let ap = self.alpha[p];
        for r in 0..m {
            let col = &mut self.binv[r * m..(r + 1) * m];
            let v = col[p] / ap;
            if v == 0.0 {
                continue;
            }
            for (i, c) in col.iter_mut().enumerate() {
                if i != p {
                    *c -= self.alpha[i] * v;
                }
            }
            col[p] = v;
        }
    }

    /// Rebuilds the basis inverse from scratch and recomputes basic values.
    fn refactor(&mut self) {
        self.since_refactor = 0;
        let m = self.m;
        // row-major B augmented with identity
        let mut a = vec![0.0; m * m];
        for (p, &b) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[b] {
                a[r * m + p] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv_row = c;
            let mut piv_val = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-12 {
                log::warn!("singular basis during refactorization; keeping product-form inverse");
                return;
            }
            if piv_row != c {
                for k in 0..m {
                    a.swap(c * m + k, piv_row * m + k);
                    inv.swap(c * m + k, piv_row * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        // inv is row-major (p, r); store column-major
        for p in 0..m {
            for r in 0..m {
                self.binv[r * m + p] = inv[p * m + r];
            }
        }
        let mut resid = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                for &(r, v) in col {
                    resid[r] -= v * self.x[j];
                }
            }
        }
        for p in 0..m {
            let b = self.basis[p];
            self.x[b] = (0..m).map(|r| self.binv[r * m + p] * resid[r]).sum();
        }
    }
}
