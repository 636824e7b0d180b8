use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, write_json, write_text, Pipeline, Stage};
use crate::adequacy::{derive_seed, AdequacyConfig, AdequacyMode};
use crate::error::{Error, Result};
use crate::fleet::scale_demand;
use crate::gep::{
    build_gep_rm, build_gep_rvc, evaluate_plan_lolh, write_plan, GepConfig, GepMarginSolver, GepModel, Plan,
};
use crate::hull::{
    check_membership, prune_empty_regions, read_disjunction, validate_exactness, write_disjunction, Disjunction,
};
use crate::milp::{write_mps, write_solution_csv, MilpSolution, MilpStatus};
use crate::sampler::{build_dataset, dataset_summary, enumerate_grid, read_dataset, write_dataset, SamplerConfig};
use crate::sweep::{
    compute_feature_bounds, partition_feature_types, run_margin_sweep, write_sweep_csv, FeaturePartition, SweepSidecar,
};
use crate::wodt::{extract_feasible_regions, predict, read_tree, train_wodt, write_tree, WodtConfig};

/// Per-step record of the margin sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: f64,
    pub iterations: usize,
    pub margins: Vec<f64>,
    pub lolh: Vec<f64>,
}

/// Year selection and margins decided by the sweep stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub lolh_threshold: f64,
    pub step_sizes: Vec<f64>,
    /// Derated LOLH of the zero-margin plan, per year.
    pub zero_margin_lolh: Vec<f64>,
    /// Years whose zero-margin LOLH exceeds the threshold.
    pub constrained_years: Vec<usize>,
    /// Smallest step size; its converged margins define the margin-based plan.
    pub rm_step: f64,
    pub rm_margins: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

const SUMMARY: &str = "sweep/summary.json";

fn sidecar_path(t: usize) -> String {
    format!("sweep/year_{t}.json")
}

fn dataset_paths(t: usize) -> (String, String) {
    (format!("datasets/year_{t}.csv"), format!("datasets/year_{t}.meta.json"))
}

fn tree_path(t: usize) -> String {
    format!("trees/year_{t}.json")
}

fn disjunction_path(t: usize) -> String {
    format!("disjunctions/year_{t}.json")
}

const RVC_MPS: &str = "models/rvc.mps";

fn status_label(s: MilpStatus) -> &'static str {
    match s {
        MilpStatus::Optimal => "optimal",
        MilpStatus::Infeasible => "infeasible",
        MilpStatus::Unbounded => "unbounded",
        MilpStatus::NodeLimit => "node_limit",
    }
}

#[derive(Serialize)]
struct ValidationArtifact<'a> {
    report: &'a crate::hull::ExactnessReport,
    removed_regions: &'a [usize],
    kept_regions: usize,
    /// Fraction of dataset samples where tree prediction and membership agree.
    dataset_agreement: f64,
}

impl Pipeline {
    pub(super) fn summary(&self) -> Result<SweepSummary> {
        read_json(&self.require(SUMMARY, Stage::Sweep)?)
    }

    fn sidecar(&self, t: usize) -> Result<SweepSidecar> {
        read_json(&self.require(sidecar_path(t), Stage::Sweep)?)
    }

    fn derated(&self) -> AdequacyConfig {
        AdequacyConfig {
            mode: AdequacyMode::Derated,
            replications: 1,
            ..self.config.adequacy.clone()
        }
    }

    fn skip_notice(&self, stage: Stage) -> Vec<String> {
        vec![format!("no constrained years; {stage} skipped")]
    }

    pub(super) fn sweep(&self) -> Result<Vec<String>> {
        let cfg = &self.config;
        let inputs = &self.inputs;
        let solver = GepMarginSolver {
            fleet: &inputs.fleet,
            base_load: &inputs.load,
            profiles: &inputs.profiles,
            config: GepConfig {
                reserve_margins: Vec::new(),
                ..cfg.gep.clone()
            },
            solver: cfg.solver,
            adequacy: self.derated(),
        };
        let outcome = run_margin_sweep(&inputs.fleet, &cfg.sweep, &solver)?;
        let partitions = partition_feature_types(&outcome.matrices, &inputs.fleet, cfg.partition_tolerance)?;
        let bounds = compute_feature_bounds(&outcome.matrices, &partitions, &cfg.relaxation)?;

        let dir = self.dir("sweep")?;
        for ((m, p), b) in outcome.matrices.iter().zip(&partitions).zip(&bounds) {
            write_sweep_csv(m, dir.join(format!("year_{}.csv", m.year)))?;
            let side = SweepSidecar {
                year: m.year,
                step_sizes: m.step_sizes.clone(),
                partition: p.clone(),
                bounds: b.clone(),
            };
            write_json(&self.out_dir.join(sidecar_path(m.year)), &side)?;
        }

        let threshold = cfg.adequacy.lolh_threshold;
        let zero = outcome.zero_margin_lolh().to_vec();
        let constrained_years: Vec<usize> = (1..=zero.len()).filter(|&t| zero[t - 1] > threshold).collect();
        let smallest = outcome
            .steps
            .iter()
            .min_by(|a, b| a.step.total_cmp(&b.step))
            .expect("at least one step size");
        let summary = SweepSummary {
            lolh_threshold: threshold,
            step_sizes: cfg.sweep.step_sizes.clone(),
            zero_margin_lolh: zero,
            constrained_years: constrained_years.clone(),
            rm_step: smallest.step,
            rm_margins: smallest.margins.clone(),
            steps: outcome
                .steps
                .iter()
                .map(|s| StepRecord {
                    step: s.step,
                    iterations: s.iterations,
                    margins: s.margins.clone(),
                    lolh: s.lolh.clone(),
                })
                .collect(),
        };
        write_json(&self.out_dir.join(SUMMARY), &summary)?;
        Ok(vec![format!("constrained years: {constrained_years:?}")])
    }

    pub(super) fn label(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        if summary.constrained_years.is_empty() {
            return Ok(vec!["no constrained years; nothing to label".into()]);
        }
        let dir = self.dir("datasets")?;
        let mut notes = Vec::new();
        for &t in &summary.constrained_years {
            let side = self.sidecar(t)?;
            let sampler = SamplerConfig {
                seed: derive_seed(self.config.seed, t as u64),
                ..self.config.sampler.clone()
            };
            let adequacy = AdequacyConfig {
                seed: derive_seed(self.config.seed, 1_000 + t as u64),
                ..self.config.adequacy.clone()
            };
            let vectors = enumerate_grid(&side.bounds, &sampler)?;
            let load = scale_demand(&self.inputs.load, &self.config.gep.horizon, t)?;
            let ds = build_dataset(
                t,
                &vectors,
                &side.partition,
                &side.bounds,
                &self.inputs.fleet,
                &load,
                &self.inputs.profiles,
                &adequacy,
                &sampler,
            )?;
            let (csv, meta) = dataset_paths(t);
            write_dataset(&ds, self.out_dir.join(csv), self.out_dir.join(meta))?;
            let s = dataset_summary(&ds)?;
            write_text(&dir.join(format!("year_{t}.summary.txt")), s.to_text())?;
            notes.push(format!(
                "year {t}: {} samples, {:.1}% reliable",
                s.count,
                100.0 * s.label_one_fraction
            ));
        }
        Ok(notes)
    }

    pub(super) fn train(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        if summary.constrained_years.is_empty() {
            return Ok(self.skip_notice(Stage::Train));
        }
        let dir = self.dir("trees")?;
        let mut table = String::from("year,samples,label_one_fraction,depth,leaves,train_accuracy\n");
        let mut notes = Vec::new();
        let mut below = Vec::new();
        for &t in &summary.constrained_years {
            let (csv, meta) = dataset_paths(t);
            let ds = read_dataset(self.require(csv, Stage::Label)?, self.require(meta, Stage::Label)?)?;
            let cfg = WodtConfig {
                seed: derive_seed(self.config.seed, 2_000 + t as u64),
                ..self.config.wodt.clone()
            };
            let tree = train_wodt(&ds, &cfg)?;
            write_tree(&tree, dir.join(format!("year_{t}.json")))?;
            let [_, ones] = ds.label_counts();
            writeln!(
                table,
                "{t},{},{},{},{},{}",
                ds.len(),
                ones as f64 / ds.len() as f64,
                tree.depth(),
                tree.num_leaves(),
                tree.train_accuracy
            )
            .unwrap();
            notes.push(format!(
                "year {t}: depth {}, {} leaves, train accuracy {:.5}",
                tree.depth(),
                tree.num_leaves(),
                tree.train_accuracy
            ));
            if tree.train_accuracy < self.config.min_train_accuracy {
                below.push((t, tree.train_accuracy));
            }
        }
        write_text(&dir.join("training.csv"), table)?;
        if let Some(&(t, acc)) = below.first() {
            return Err(Error::invariant(
                "min_train_accuracy",
                format!(
                    "year {t}: train accuracy {acc} is below {}",
                    self.config.min_train_accuracy
                ),
            ));
        }
        Ok(notes)
    }

    pub(super) fn extract(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        if summary.constrained_years.is_empty() {
            return Ok(self.skip_notice(Stage::Extract));
        }
        let dir = self.dir("disjunctions")?;
        let mut notes = Vec::new();
        for &t in &summary.constrained_years {
            let tree = read_tree(self.require(tree_path(t), Stage::Train)?)?;
            let side = self.sidecar(t)?;
            let raw = extract_feasible_regions(&tree, &side.bounds)?;
            let report = validate_exactness(&raw);
            let (disj, removed) = prune_empty_regions(&raw);
            if disj.regions.is_empty() {
                return Err(Error::NoFeasibleRegion { year: t });
            }
            let (csv, meta) = dataset_paths(t);
            let ds = read_dataset(self.require(csv, Stage::Label)?, self.require(meta, Stage::Label)?)?;
            let agree = ds
                .samples
                .iter()
                .filter(|s| {
                    let x: Vec<f64> = s.x.iter().map(|&v| v as f64).collect();
                    (predict(&tree, &x) == 1) == check_membership(&disj, &x)
                })
                .count();
            let agreement = agree as f64 / ds.len().max(1) as f64;
            write_disjunction(&disj, dir.join(format!("year_{t}.json")))?;
            write_json(
                &dir.join(format!("year_{t}.validation.json")),
                &ValidationArtifact {
                    report: &report,
                    removed_regions: &removed,
                    kept_regions: disj.regions.len(),
                    dataset_agreement: agreement,
                },
            )?;
            notes.push(format!(
                "year {t}: {} regions ({} empty removed), tree/region agreement {agreement}",
                disj.regions.len(),
                removed.len()
            ));
        }
        Ok(notes)
    }

    fn disjunctions(&self, summary: &SweepSummary) -> Result<(BTreeMap<usize, Disjunction>, Vec<FeaturePartition>)> {
        let mut disj = BTreeMap::new();
        let mut parts = Vec::new();
        for &t in &summary.constrained_years {
            disj.insert(t, read_disjunction(self.require(disjunction_path(t), Stage::Extract)?)?);
            parts.push(self.sidecar(t)?.partition);
        }
        Ok((disj, parts))
    }

    fn rvc_model(&self, summary: &SweepSummary) -> Result<GepModel> {
        let (disj, parts) = self.disjunctions(summary)?;
        let cfg = GepConfig {
            reserve_margins: Vec::new(),
            ..self.config.gep.clone()
        };
        build_gep_rvc(
            &self.inputs.fleet,
            &self.inputs.load,
            &self.inputs.profiles,
            &cfg,
            &disj,
            &parts,
        )
    }

    pub(super) fn encode(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        if summary.constrained_years.is_empty() {
            return Ok(self.skip_notice(Stage::Encode));
        }
        let model = self.rvc_model(&summary)?;
        let dir = self.dir("models")?;
        write_mps(&model.model, self.out_dir.join(RVC_MPS))?;
        let mut table = String::from("year,features,regions,vars_added,rows_added\n");
        for (t, enc) in &model.encodings {
            writeln!(
                table,
                "{t},{},{},{},{}",
                enc.x_vars.len(),
                enc.w_vars.len(),
                enc.vars_added(),
                enc.rows_added()
            )
            .unwrap();
        }
        write_text(&dir.join("encoding.csv"), table)?;
        Ok(vec![format!(
            "RVC model: {} variables, {} rows",
            model.model.num_vars(),
            model.model.num_rows()
        )])
    }

    fn write_solution(&self, dir: &Path, model: &GepModel, sol: &MilpSolution, plan: &Plan) -> Result<()> {
        write_plan(plan, dir)?;
        write_solution_csv(
            &model.model,
            status_label(sol.status),
            sol.objective,
            &sol.x,
            dir.join("solution.csv"),
        )?;
        let results = evaluate_plan_lolh(
            plan,
            &self.inputs.fleet,
            &self.inputs.load,
            &self.config.gep.horizon,
            &self.inputs.profiles,
            &self.config.adequacy,
        )?;
        let threshold = self.config.adequacy.lolh_threshold;
        let mut table = String::from("year,lolh,eue_mwh,lolh_std_error,meets_threshold\n");
        for (t, r) in results.iter().enumerate() {
            writeln!(
                table,
                "{},{},{},{},{}",
                t + 1,
                r.lolh,
                r.eue_mwh,
                r.lolh_std_error,
                r.lolh <= threshold
            )
            .unwrap();
        }
        write_text(&dir.join("lolh.csv"), table)
    }

    pub(super) fn solve_rm(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        let cfg = GepConfig {
            reserve_margins: summary.rm_margins.clone(),
            ..self.config.gep.clone()
        };
        let model = build_gep_rm(&self.inputs.fleet, &self.inputs.load, &self.inputs.profiles, &cfg)?;
        self.dir("models")?;
        write_mps(&model.model, self.out_dir.join("models/rm.mps"))?;
        let (sol, plan) = model.solve(&self.config.solver)?;
        let dir = self.dir("rm")?;
        self.write_solution(&dir, &model, &sol, &plan)?;
        Ok(vec![format!(
            "RM plan objective {} ({} nodes)",
            plan.objective, sol.nodes_explored
        )])
    }

    pub(super) fn solve_rvc(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        if !summary.constrained_years.is_empty() {
            self.require(RVC_MPS, Stage::Encode)?;
        }
        let model = self.rvc_model(&summary)?;
        let (sol, plan) = model.solve(&self.config.solver)?;
        let dir = self.dir("rvc")?;
        self.write_solution(&dir, &model, &sol, &plan)?;

        let (disj, _) = self.disjunctions(&summary)?;
        let mut table = String::from("year,features,member,active_region\n");
        for (t, d) in &disj {
            let x = plan.feature_vector(*t, &d.feature_names);
            let features: Vec<String> = d
                .feature_names
                .iter()
                .zip(&x)
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            let region = model.encodings[t]
                .active_region(&sol.x)
                .map_or(String::new(), |k| k.to_string());
            writeln!(table, "{t},{},{},{region}", features.join(";"), check_membership(d, &x)).unwrap();
        }
        write_text(&dir.join("membership.csv"), table)?;
        Ok(vec![format!(
            "RVC plan objective {} ({} nodes)",
            plan.objective, sol.nodes_explored
        )])
    }
}
