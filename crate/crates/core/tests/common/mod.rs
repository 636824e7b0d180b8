//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvc_gep::fleet::{Category, Fleet, GeneratorType, HourlySeries, SeriesKind};
use rvc_gep::hull::{encode_disjunction, Disjunction, Region};
use rvc_gep::milp::{solve_milp, MilpModel, MilpStatus, Sense, VarKind};

const ORACLE_TOL: f64 = 1e-9;

pub fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/desk/run.toml")
}

/// Random bounded MILP: up to 12 integer columns with at most 4 values each
/// (at most 4096 integer points), up to 2 continuous columns, integer data.
pub fn random_milp(seed: u64) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MilpModel::new(format!("random_{seed}"));
    let n_int = rng.gen_range(1..=12);
    let mut points: u64 = 1;
    for j in 0..n_int {
        let mut size = rng.gen_range(2..=4u64);
        while points * size > 4096 {
            size -= 1;
        }
        points *= size;
        let lo = rng.gen_range(-1..=1) as f64;
        let cost = rng.gen_range(-5..=5) as f64;
        m.add_integer(format!("i{j}"), lo, lo + (size - 1) as f64, cost);
    }
    let n_cont = rng.gen_range(0..=2);
    for j in 0..n_cont {
        let (lo, up) = if rng.gen_bool(0.5) { (0.0, 5.0) } else { (-3.0, 3.0) };
        m.add_continuous(format!("c{j}"), lo, up, rng.gen_range(-5..=5) as f64);
    }
    // a random point of the box makes most instances feasible
    let anchor: Vec<f64> = m
        .vars
        .iter()
        .map(|v| {
            if v.kind.is_integral() {
                rng.gen_range(v.lower as i64..=v.upper as i64) as f64
            } else {
                rng.gen_range(v.lower..=v.upper)
            }
        })
        .collect();
    let n = m.num_vars();
    for i in 0..rng.gen_range(1..=5) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            let a = rng.gen_range(-4..=4) as f64;
            if rng.gen_bool(0.6) && a != 0.0 {
                coeffs.push((j, a));
            }
        }
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let sense = match rng.gen_range(0..5) {
            0 => Sense::Eq,
            1 | 2 => Sense::Le,
            _ => Sense::Ge,
        };
        let slack = rng.gen_range(0..=3) as f64;
        let mut rhs = match sense {
            Sense::Le => (activity + slack).floor(),
            Sense::Ge => (activity - slack).ceil(),
            Sense::Eq => activity.round(),
        };
        if rng.gen_bool(0.1) {
            rhs = rng.gen_range(-10..=10) as f64;
        }
        m.add_row(
            format!("r{i}"),
            coeffs.into_iter().map(|(j, a)| (rvc_gep::milp::VarId(j), a)),
            sense,
            rhs,
        );
    }
    m
}

/// `Some(objective)` of the best point, `None` when infeasible; enumerates
/// every integer assignment and solves the continuous rest by vertex search.
pub fn brute_force(m: &MilpModel) -> Option<f64> {
    let ints: Vec<usize> = (0..m.num_vars()).filter(|&j| m.vars[j].kind.is_integral()).collect();
    let conts: Vec<usize> = (0..m.num_vars())
        .filter(|&j| m.vars[j].kind == VarKind::Continuous)
        .collect();
    let mut x = vec![0.0; m.num_vars()];
    for &j in &ints {
        x[j] = m.vars[j].lower;
    }
    let mut best: Option<f64> = None;
    loop {
        if let Some(v) = best_continuous(m, &mut x, &conts) {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        // odometer step
        let mut k = 0;
        loop {
            if k == ints.len() {
                return best;
            }
            let j = ints[k];
            if x[j] < m.vars[j].upper {
                x[j] += 1.0;
                break;
            }
            x[j] = m.vars[j].lower;
            k += 1;
        }
    }
}

fn feasible(m: &MilpModel, x: &[f64]) -> bool {
    m.rows.iter().all(|r| {
        let a = r.activity(x);
        match r.sense {
            Sense::Le => a <= r.rhs + ORACLE_TOL,
            Sense::Ge => a >= r.rhs - ORACLE_TOL,
            Sense::Eq => (a - r.rhs).abs() <= ORACLE_TOL,
        }
    }) && x
        .iter()
        .zip(&m.vars)
        .all(|(v, var)| *v >= var.lower - ORACLE_TOL && *v <= var.upper + ORACLE_TOL)
}

/// A line `a·y = b` over the continuous columns.
struct Line {
    a: Vec<f64>,
    b: f64,
}

/// Minimum over the continuous columns with the integers in `x` held fixed.
fn best_continuous(m: &MilpModel, x: &mut [f64], conts: &[usize]) -> Option<f64> {
    if conts.is_empty() {
        return feasible(m, x).then(|| m.objective_value(x));
    }
    let mut lines = Vec::new();
    for (k, &j) in conts.iter().enumerate() {
        for bound in [m.vars[j].lower, m.vars[j].upper] {
            let mut a = vec![0.0; conts.len()];
            a[k] = 1.0;
            lines.push(Line { a, b: bound });
        }
    }
    for r in &m.rows {
        let a: Vec<f64> = conts
            .iter()
            .map(|&j| r.coeffs.iter().filter(|(v, _)| v.0 == j).map(|(_, c)| c).sum())
            .collect();
        if a.iter().all(|c| *c == 0.0) {
            continue;
        }
        let fixed: f64 = r
            .coeffs
            .iter()
            .filter(|(v, _)| !conts.contains(&v.0))
            .map(|(v, c)| c * x[v.0])
            .sum();
        lines.push(Line { a, b: r.rhs - fixed });
    }
    let mut best: Option<f64> = None;
    let mut consider = |y: &[f64], x: &mut [f64]| {
        for (k, &j) in conts.iter().enumerate() {
            x[j] = y[k];
        }
        if feasible(m, x) {
            let v = m.objective_value(x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    };
    match conts.len() {
        1 => {
            for l in &lines {
                consider(&[l.b / l.a[0]], x);
            }
        }
        2 => {
            for p in 0..lines.len() {
                for q in p + 1..lines.len() {
                    let (l1, l2) = (&lines[p], &lines[q]);
                    let det = l1.a[0] * l2.a[1] - l1.a[1] * l2.a[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let y0 = (l1.b * l2.a[1] - l1.a[1] * l2.b) / det;
                    let y1 = (l1.a[0] * l2.b - l1.b * l2.a[0]) / det;
                    consider(&[y0, y1], x);
                }
            }
        }
        _ => panic!("vertex oracle handles at most two continuous columns"),
    }
    for &j in conts {
        x[j] = 0.0;
    }
    best
}

/// Whether the hull encoding admits `x` once the features are pinned to it.
pub fn hull_admits(disj: &Disjunction, x: &[f64]) -> bool {
    let mut m = MilpModel::new("pinned");
    let vars: Vec<_> = x
        .iter()
        .enumerate()
        .map(|(j, &v)| m.add_continuous(format!("x{j}"), v, v, 0.0))
        .collect();
    encode_disjunction(&mut m, disj, &vars).unwrap();
    match solve_milp(&m, 10_000, 1e-9).status {
        MilpStatus::Optimal => true,
        MilpStatus::Infeasible => false,
        other => panic!("unexpected status {other:?}"),
    }
}

/// Random 2-feature disjunction over an integer box of at most 20 x 20.
pub fn random_disjunction(seed: u64) -> Disjunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper = vec![rng.gen_range(3..=20) as f64, rng.gen_range(3..=20) as f64];
    let round2 = |v: f64| (v * 100.0).round() / 100.0;
    let regions = (0..rng.gen_range(1..=4))
        .map(|_| {
            let center = [rng.gen_range(0.0..=upper[0]), rng.gen_range(0.0..=upper[1])];
            let m = rng.gen_range(0..=3);
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| vec![round2(rng.gen_range(-1.0..=1.0)), round2(rng.gen_range(-1.0..=1.0))])
                .collect();
            let rhs = rows
                .iter()
                .map(|r| round2(r[0] * center[0] + r[1] * center[1] + rng.gen_range(-1.0..=3.0)))
                .collect();
            Region { rows, rhs }
        })
        .collect();
    Disjunction {
        year: 1,
        feature_names: vec!["a".into(), "b".into()],
        lower: vec![0.0, 0.0],
        upper,
        regions,
    }
}

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

/// Two single-unit thermal types and a 24-hour load.
pub fn two_unit_system() -> (Fleet, HourlySeries) {
    let fleet = Fleet::new(vec![thermal("a", 100.0, 0.08), thermal("b", 60.0, 0.15)]).unwrap();
    let load: Vec<f64> = (0..24)
        .map(|h| 50.0 + 100.0 * (std::f64::consts::PI * h as f64 / 23.0).sin())
        .collect();
    (fleet, HourlySeries::new("load", SeriesKind::LoadMw, load).unwrap())
}

/// Expected loss-of-load hours by enumerating the four outage states per hour.
pub fn exact_lolh(fleet: &Fleet, load: &HourlySeries) -> f64 {
    let units: Vec<(f64, f64)> = fleet
        .iter()
        .map(|g| (g.unit_capacity_mw, g.forced_outage_rate))
        .collect();
    let mut total = 0.0;
    for &d in load.values() {
        for state in 0..(1u32 << units.len()) {
            let mut p = 1.0;
            let mut avail = 0.0;
            for (k, &(mw, q)) in units.iter().enumerate() {
                if state >> k & 1 == 1 {
                    avail += mw;
                    p *= 1.0 - q;
                } else {
                    p *= q;
                }
            }
            if avail < d {
                total += p;
            }
        }
    }
    total
}

/// Writes a small two-year case (24 hours, two candidate types, one old
/// type) into `dir` and returns the path of its run configuration. Load is
/// 150 MW during `peak_hours` evening hours and 100 MW otherwise.
pub fn write_toy_case(dir: &Path, peak_hours: usize) -> PathBuf {
    let fleet = r#"
[[generator]]
name = "peaker"
category = "new"
unit_capacity_mw = 25.0
forced_outage_rate = 0.1
capital_cost = 1.0
fixed_om_cost = 0.1
variable_cost = 0.00008
co2_rate = 0.6

[[generator]]
name = "base"
category = "new"
unit_capacity_mw = 50.0
forced_outage_rate = 0.05
capital_cost = 3.0
fixed_om_cost = 0.2
variable_cost = 0.00003
co2_rate = 0.4

[[generator]]
name = "old"
category = "old"
unit_capacity_mw = 20.0
forced_outage_rate = 0.08
capital_cost = 0.0
fixed_om_cost = 0.15
variable_cost = 0.00005
co2_rate = 0.9
initial_units = 2
"#;
    std::fs::write(dir.join("fleet.toml"), fleet).unwrap();
    let load: String = (0..24)
        .map(|h| {
            if (16..16 + peak_hours).contains(&h) {
                "150\n"
            } else {
                "100\n"
            }
        })
        .collect();
    std::fs::write(dir.join("load.csv"), load).unwrap();
    let run = r#"
seed = 5
fleet = "fleet.toml"
load = "load.csv"
out_dir = "out"

[relaxation]
down = 1.0
up = 1.0

[gep]
representative_hours = [3, 18]
hour_weight = 12.0
unserved_energy_penalty = 0.01

[gep.horizon]
num_years = 2
load_growth_rate = 0.02
"#;
    std::fs::write(dir.join("run.toml"), run).unwrap();
    dir.join("run.toml")
}

/// Random weighted node data with `d <= 5` and `n <= 200`.
pub struct GradientInstance {
    pub x: Vec<f64>,
    pub y: Vec<u8>,
    pub w: Vec<f64>,
    pub dim: usize,
    pub theta: Vec<f64>,
}

pub fn gradient_instance(seed: u64) -> GradientInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(1..=5);
    let n = rng.gen_range(10..=200);
    GradientInstance {
        x: (0..n * dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
        y: (0..n).map(|_| rng.gen_range(0..=1)).collect(),
        w: (0..n).map(|_| rng.gen_range(0.1..2.0)).collect(),
        dim,
        theta: (0..=dim).map(|_| rng.gen_range(-3.0..3.0)).collect(),
    }
}

/// Norm-wise relative error of the analytic gradient against central
/// differences, Richardson-extrapolated over steps `h` and `h / 2`.
pub fn gradient_error(f: impl Fn(&[f64], &mut [f64]) -> f64, theta: &[f64]) -> f64 {
    let mut g = vec![0.0; theta.len()];
    f(theta, &mut g);
    let mut scratch = vec![0.0; theta.len()];
    let mut central = |j: usize, h: f64| {
        let mut p = theta.to_vec();
        p[j] += h;
        let up = f(&p, &mut scratch);
        p[j] -= 2.0 * h;
        let down = f(&p, &mut scratch);
        (up - down) / (2.0 * h)
    };
    let h = 1e-3;
    let fd: Vec<f64> = (0..theta.len())
        .map(|j| (4.0 * central(j, h / 2.0) - central(j, h)) / 3.0)
        .collect();
    let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm(&g).max(norm(&fd)).max(1e-12)
}
