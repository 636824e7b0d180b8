//! End-to-end acceptance checks. Runs as a plain binary that prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rvc_gep::adequacy::{label_sample, simulate_lolh, AdequacyConfig, AdequacyMode, ReliabilityResult};
use rvc_gep::fleet::{GenerationMix, ProfileMap};
use rvc_gep::gep::{evaluate_plan_lolh, read_plan};
use rvc_gep::hull::{check_membership, encode_disjunction, read_disjunction, Disjunction, Region};
use rvc_gep::milp::{solve_milp, MilpModel, MilpStatus};
use rvc_gep::pipeline::{Pipeline, SweepSummary};
use rvc_gep::sampler::read_dataset;
use rvc_gep::sweep::{compute_feature_bounds, relaxed_bounds, FeaturePartition, RelaxationConfig, SweepMatrix};
use rvc_gep::wodt::loss::{logistic_loss, split_entropy, NodeData};
use rvc_gep::wodt::{predict, train_wodt, WodtConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || {
        format!("took {:.1}s, limit {limit}s", elapsed.as_secs_f64())
    })
}

/// Two full desk-case runs with the same seed.
struct DeskRuns {
    _dir: tempfile::TempDir,
    first: PathBuf,
    second: PathBuf,
    pipeline: Pipeline,
}

impl DeskRuns {
    fn run() -> Result<Self, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let first = dir.path().join("first");
        let second = dir.path().join("second");
        let mut pipeline = None;
        for out in [&first, &second] {
            let p = Pipeline::open(&common::desk_config(), &[], Some(out.clone()), None).map_err(|e| e.to_string())?;
            p.run_all().map_err(|e| e.to_string())?;
            pipeline = Some(p);
        }
        Ok(Self {
            _dir: dir,
            first,
            second,
            pipeline: pipeline.unwrap(),
        })
    }

    fn summary(&self) -> Result<SweepSummary, String> {
        let text = fs::read_to_string(self.first.join("sweep/summary.json")).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    }

    fn disjunction(&self, t: usize) -> Result<Disjunction, String> {
        read_disjunction(self.first.join(format!("disjunctions/year_{t}.json"))).map_err(|e| e.to_string())
    }
}

fn monte_carlo_matches_enumeration() -> Outcome {
    let (fleet, load) = common::two_unit_system();
    let mix = GenerationMix::new(1).with("a", 1).with("b", 1);
    let exact = common::exact_lolh(&fleet, &load);
    let start = Instant::now();
    let r = simulate_lolh(
        &fleet,
        &mix,
        &load,
        &ProfileMap::new(),
        &AdequacyConfig::monte_carlo(100_000, 17),
    )
    .map_err(|e| e.to_string())?;
    within(start.elapsed(), 10.0)?;
    let z = (r.lolh - exact).abs() / r.lolh_std_error;
    ensure(z <= 3.0, || {
        format!("estimate {} vs exact {exact}: {z:.2} standard errors", r.lolh)
    })?;
    Ok(format!("estimate {:.5} vs exact {exact:.5} ({z:.2} SE)", r.lolh))
}

fn labels_follow_the_threshold() -> Outcome {
    let cfg = AdequacyConfig::default();
    let result = |lolh| ReliabilityResult {
        lolh,
        eue_mwh: 0.0,
        mode: AdequacyMode::Derated,
        replications: 1,
        seed: 0,
        lolh_std_error: 0.0,
    };
    let a = label_sample(&result(2.34), &cfg);
    let b = label_sample(&result(44.58), &cfg);
    ensure(a == 1 && b == 0, || format!("labels {a} and {b}"))?;
    Ok("2.34 -> 1, 44.58 -> 0".into())
}

fn bounds_from_sweep_extrema() -> Outcome {
    let direct = [relaxed_bounds(432, 435, 0.0046, 0.02), relaxed_bounds(16, 16, 1.0, 0.5)];
    ensure(direct == [(430, 444), (0, 24)], || format!("relaxed bounds {direct:?}"))?;

    let matrix = SweepMatrix {
        year: 1,
        step_sizes: vec![0.01, 0.02, 0.03],
        rows: [
            ("a".to_string(), vec![432, 435, 433]),
            ("b".to_string(), vec![16, 16, 16]),
        ]
        .into_iter()
        .collect(),
    };
    let partition = FeaturePartition {
        year: 1,
        feature_new: vec!["a".into(), "b".into()],
        ..FeaturePartition::default()
    };
    let mut relax = RelaxationConfig::uniform(0.0046, 0.02);
    relax.overrides.push(rvc_gep::sweep::RelaxOverride {
        type_name: "b".into(),
        year: None,
        down: Some(1.0),
        up: Some(0.5),
    });
    let bounds = compute_feature_bounds(&[matrix], &[partition], &relax).map_err(|e| e.to_string())?;
    let got: Vec<(i64, i64)> = bounds[0].features.values().map(|r| (r.lower, r.upper)).collect();
    ensure(got == [(430, 444), (0, 24)], || format!("feature bounds {got:?}"))?;
    Ok("[430, 444] and [0, 24]".into())
}

fn trees_fit_the_desk_datasets(runs: &DeskRuns) -> Outcome {
    let summary = runs.summary()?;
    ensure(!summary.constrained_years.is_empty(), || "no constrained years".into())?;
    let mut parts = Vec::new();
    for &t in &summary.constrained_years {
        let dir = runs.first.join("datasets");
        let ds = read_dataset(
            dir.join(format!("year_{t}.csv")),
            dir.join(format!("year_{t}.meta.json")),
        )
        .map_err(|e| e.to_string())?;
        let [zeros, ones] = ds.label_counts();
        let n = ds.len();
        ensure(n >= 10_000, || format!("year {t}: only {n} samples"))?;
        let minority = zeros.min(ones) as f64 / n as f64;
        ensure(minority >= 0.05, || {
            format!("year {t}: minority label fraction {minority:.4}")
        })?;

        let cfg = WodtConfig {
            max_depth: 6,
            ..runs.pipeline.config.wodt.clone()
        };
        let start = Instant::now();
        let tree = train_wodt(&ds, &cfg).map_err(|e| e.to_string())?;
        within(start.elapsed(), 60.0)?;
        let correct = ds
            .samples
            .iter()
            .filter(|s| {
                let x: Vec<f64> = s.x.iter().map(|&v| v as f64).collect();
                predict(&tree, &x) == s.label
            })
            .count();
        let acc = correct as f64 / n as f64;
        ensure(acc >= 0.999, || format!("year {t}: train accuracy {acc:.5}"))?;
        parts.push(format!("year {t}: {n} samples, accuracy {acc:.5}"));
    }
    Ok(parts.join("; "))
}

fn gradients_match_differences() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let inst = common::gradient_instance(seed);
        let data = NodeData {
            x: &inst.x,
            y: &inst.y,
            weight: &inst.w,
            dim: inst.dim,
        };
        let err = if seed % 2 == 0 {
            common::gradient_error(|t, g| split_entropy(&data, t, g), &inst.theta)
        } else {
            common::gradient_error(|t, g| logistic_loss(&data, t, g, 1e-3), &inst.theta)
        };
        ensure(err <= 1e-5, || format!("instance {seed}: relative error {err:e}"))?;
        worst = worst.max(err);
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("20 instances, worst relative error {worst:.2e}"))
}

fn hull_is_exact_on_the_grid() -> Outcome {
    let mut points = 0;
    for seed in 0..10 {
        let disj = common::random_disjunction(1_000 + seed);
        for a in 0..=disj.upper[0] as i64 {
            for b in 0..=disj.upper[1] as i64 {
                let x = [a as f64, b as f64];
                let (milp, direct) = (common::hull_admits(&disj, &x), check_membership(&disj, &x));
                ensure(milp == direct, || {
                    format!("disjunction {seed} at {x:?}: encoding {milp}, direct {direct}")
                })?;
                points += 1;
            }
        }
    }
    Ok(format!("10 disjunctions, {points} grid points agree"))
}

fn encoding_size_formula() -> Outcome {
    let mut checked = 0;
    for d in 1..=5 {
        for n in 1..=10 {
            let rows_per_region = (checked % 4) as usize;
            let disj = Disjunction {
                year: 1,
                feature_names: (0..d).map(|j| format!("f{j}")).collect(),
                lower: vec![0.0; d],
                upper: vec![10.0; d],
                regions: (0..n)
                    .map(|k| Region {
                        rows: vec![vec![1.0; d]; (rows_per_region + k) % 4],
                        rhs: vec![5.0; (rows_per_region + k) % 4],
                    })
                    .collect(),
            };
            let m_total: usize = disj.regions.iter().map(Region::num_rows).sum();
            let mut m = MilpModel::new("size");
            let vars: Vec<_> = (0..d)
                .map(|j| m.add_continuous(format!("x{j}"), 0.0, 10.0, 0.0))
                .collect();
            let enc = encode_disjunction(&mut m, &disj, &vars).map_err(|e| e.to_string())?;
            let want = (n * (d + 1), d + 1 + m_total + 2 * d * n);
            let got = (enc.vars_added(), enc.rows_added());
            ensure(got == want, || format!("d={d}, N={n}: got {got:?}, expected {want:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} shapes"))
}

fn milp_matches_brute_force() -> Outcome {
    let start = Instant::now();
    let mut infeasible = 0;
    for seed in 0..100 {
        let m = common::random_milp(50_000 + seed);
        let s = solve_milp(&m, 1_000_000, 1e-9);
        match common::brute_force(&m) {
            None => {
                ensure(s.status == MilpStatus::Infeasible, || {
                    format!("instance {seed}: {:?}, expected infeasible", s.status)
                })?;
                infeasible += 1;
            }
            Some(best) => {
                ensure(s.status == MilpStatus::Optimal, || {
                    format!("instance {seed}: {:?}", s.status)
                })?;
                ensure((s.objective - best).abs() <= 1e-6 * best.abs().max(1.0), || {
                    format!("instance {seed}: solver {} vs enumeration {best}", s.objective)
                })?;
            }
        }
    }
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "100 instances ({infeasible} infeasible) in {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn rvc_plan_is_reliable(runs: &DeskRuns) -> Outcome {
    let summary = runs.summary()?;
    let plan = read_plan(runs.first.join("rvc")).map_err(|e| e.to_string())?;
    let p = &runs.pipeline;
    let cfg = AdequacyConfig {
        mode: AdequacyMode::Derated,
        ..p.config.adequacy.clone()
    };
    let lolh = evaluate_plan_lolh(
        &plan,
        &p.inputs.fleet,
        &p.inputs.load,
        &p.config.gep.horizon,
        &p.inputs.profiles,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for &t in &summary.constrained_years {
        let l = lolh[t - 1].lolh;
        ensure(l <= cfg.lolh_threshold, || format!("year {t}: LOLH {l}"))?;
        let disj = runs.disjunction(t)?;
        let x = plan.feature_vector(t, &disj.feature_names);
        ensure(check_membership(&disj, &x), || {
            format!("year {t}: {x:?} outside the disjunction")
        })?;
        parts.push(format!("year {t}: {l}"));
    }
    Ok(format!("LOLH {}", parts.join(", ")))
}

fn rvc_no_worse_than_rm(runs: &DeskRuns) -> Outcome {
    let summary = runs.summary()?;
    let rm = read_plan(runs.first.join("rm")).map_err(|e| e.to_string())?;
    let rvc = read_plan(runs.first.join("rvc")).map_err(|e| e.to_string())?;
    let mut inside = true;
    for &t in &summary.constrained_years {
        let disj = runs.disjunction(t)?;
        inside &= check_membership(&disj, &rm.feature_vector(t, &disj.feature_names));
    }
    if inside {
        ensure(rvc.objective <= rm.objective + 1e-6, || {
            format!("RVC {} exceeds RM {}", rvc.objective, rm.objective)
        })?;
    }
    Ok(format!(
        "RM inside: {inside}; RVC {:.6} vs RM {:.6}",
        rvc.objective, rm.objective
    ))
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn reruns_are_byte_identical(runs: &DeskRuns) -> Outcome {
    let a = files_under(&runs.first);
    let b = files_under(&runs.second);
    ensure(a.keys().eq(b.keys()), || "artifact sets differ".into())?;
    for (path, bytes) in &a {
        ensure(&b[path] == bytes, || format!("{} differs", path.display()))?;
    }
    Ok(format!("{} artifacts", a.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = DeskRuns::run();
    let desk_time = start.elapsed();
    let desk = |f: fn(&DeskRuns) -> Outcome| match &runs {
        Ok(r) => f(r),
        Err(e) => Err(format!("desk pipeline failed: {e}")),
    };

    let checks: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (
            "Monte Carlo LOLH matches outage enumeration",
            Box::new(monte_carlo_matches_enumeration),
        ),
        (
            "labels follow the LOLH threshold",
            Box::new(labels_follow_the_threshold),
        ),
        ("feature bounds from sweep extrema", Box::new(bounds_from_sweep_extrema)),
        (
            "depth-6 trees fit the desk datasets",
            Box::new(move || desk(trees_fit_the_desk_datasets)),
        ),
        (
            "split gradients match finite differences",
            Box::new(gradients_match_differences),
        ),
        (
            "hull encoding is exact on integer grids",
            Box::new(hull_is_exact_on_the_grid),
        ),
        ("hull encoding size formula", Box::new(encoding_size_formula)),
        ("MILP solver matches brute force", Box::new(milp_matches_brute_force)),
        (
            "RVC plan is reliable in constrained years",
            Box::new(move || desk(rvc_plan_is_reliable)),
        ),
        (
            "RVC never costs more than a feasible RM plan",
            Box::new(move || desk(rvc_no_worse_than_rm)),
        ),
        (
            "same seed gives byte-identical artifacts",
            Box::new(move || desk(reruns_are_byte_identical)),
        ),
    ];

    println!("desk pipeline ran twice in {:.1}s", desk_time.as_secs_f64());
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
