//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 25;
const MAX_ZOOM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_memory")]
    pub memory: usize,
    /// Stop once the gradient's Euclidean norm falls to this value.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_max_iter() -> usize {
    100
}

fn default_memory() -> usize {
    10
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            memory: default_memory(),
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    dg: f64,
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the function value.
///
/// Trial points with non-finite values are treated as overshooting and
/// shrink the step; a non-finite value at the start point is an error.
pub fn lbfgs_minimize<F>(mut objective: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !finite(f, &g) {
        return Err(Error::NonFinite { iterate: x });
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let gnorm = norm(&g);
        if gnorm <= cfg.tolerance {
            break;
        }

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += si * (a - beta);
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dg0 = dot(&d, &g);
        if !(dg0 < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            dg0 = -gnorm * gnorm;
        }
        let alpha0 = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };

        let Some(p) = line_search(&mut objective, &x, f, dg0, &d, alpha0) else {
            log::debug!("lbfgs: line search failed at iteration {iterations}");
            break;
        };
        let s: Vec<f64> = d.iter().map(|di| p.alpha * di).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = p.f;
        g = p.g;
        iterations += 1;
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == cfg.memory.max(1) {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
    }
    let grad_norm = norm(&g);
    Ok(LbfgsResult {
        x,
        f,
        iterations,
        grad_norm,
    })
}

fn line_search<F>(objective: &mut F, x: &[f64], f0: f64, dg0: f64, d: &[f64], alpha0: f64) -> Option<Point>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut trial = vec![0.0; x.len()];
    let mut eval = |alpha: f64| -> Point {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(d) {
            *t = xi + alpha * di;
        }
        let mut g = vec![0.0; x.len()];
        let f = objective(&trial, &mut g);
        let dg = dot(&g, d);
        if finite(f, &g) {
            Point { alpha, f, g, dg }
        } else {
            Point {
                alpha,
                f: f64::INFINITY,
                g,
                dg: f64::NAN,
            }
        }
    };
    let armijo = |p: &Point| p.f <= f0 + C1 * p.alpha * dg0;

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        g: Vec::new(),
        dg: dg0,
    };
    let mut alpha = alpha0;
    let mut last_good: Option<Point> = None;
    for i in 0..MAX_BRACKET {
        let p = eval(alpha);
        if !armijo(&p) || (i > 0 && p.f >= prev.f) {
            return zoom(&mut eval, prev, p, f0, dg0).or(last_good);
        }
        if p.dg.abs() <= -C2 * dg0 {
            return Some(p);
        }
        if p.dg >= 0.0 {
            return zoom(&mut eval, p, prev, f0, dg0);
        }
        alpha *= 2.0;
        // keep the newest acceptable point for unbounded directions
        last_good = Some(Point {
            alpha: p.alpha,
            f: p.f,
            g: p.g.clone(),
            dg: p.dg,
        });
        prev = p;
    }
    last_good
}

/// Shrinks the bracket `[lo, hi]`, where `lo` satisfies sufficient decrease.
fn zoom<E>(eval: &mut E, mut lo: Point, mut hi: Point, f0: f64, dg0: f64) -> Option<Point>
where
    E: FnMut(f64) -> Point,
{
    for _ in 0..MAX_ZOOM {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = b - a;
        // quadratic interpolation from (f_lo, dg_lo, f_hi), safeguarded
        let denom = 2.0 * (hi.f - lo.f - lo.dg * width);
        let mut alpha = if hi.f.is_finite() && denom.abs() > 0.0 {
            a - lo.dg * width * width / denom
        } else {
            a + 0.5 * width
        };
        let (left, right) = if a < b { (a, b) } else { (b, a) };
        let margin = 0.1 * (right - left);
        if !alpha.is_finite() || alpha < left + margin || alpha > right - margin {
            alpha = a + 0.5 * width;
        }
        if (right - left) <= 1e-16 * right.abs().max(1.0) {
            break;
        }
        let p = eval(alpha);
        if p.f > f0 + C1 * alpha * dg0 || p.f >= lo.f {
            hi = p;
        } else {
            if p.dg.abs() <= -C2 * dg0 {
                return Some(p);
            }
            if p.dg * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    (lo.alpha > 0.0).then_some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = lbfgs_minimize(
            |x, g| {
                g[0] = 2.0 * x[0];
                g[1] = 2.0 * x[1];
                x[0] * x[0] + x[1] * x[1]
            },
            &[3.0, 4.0],
            &LbfgsConfig::default(),
        )
        .unwrap();
        assert!(r.f <= 1e-10, "f = {}", r.f);
        assert!(r.x.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn rosenbrock() {
        let r = lbfgs_minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            &LbfgsConfig {
                max_iter: 200,
                ..LbfgsConfig::default()
            },
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn unbounded_linear_stops_at_iteration_cap() {
        let c = [1.0, -2.0];
        let r = lbfgs_minimize(
            |x, g| {
                g.copy_from_slice(&c);
                c[0] * x[0] + c[1] * x[1]
            },
            &[0.0, 0.0],
            &LbfgsConfig {
                max_iter: 5,
                ..LbfgsConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.iterations, 5);
        assert!(r.f < 0.0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let e = lbfgs_minimize(|_, _| f64::NAN, &[1.0], &LbfgsConfig::default()).unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
    }
}
