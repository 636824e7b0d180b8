use std::fmt::Write as _;

use super::{write_text, Pipeline, Stage};
use crate::error::Result;
use crate::fleet::scale_demand;
use crate::gep::{evaluate_plan_lolh, read_plan, Plan};
use crate::milp::format_number;

/// Firm capacity of a plan year: thermal nameplate plus credited renewable nameplate.
fn firm_capacity(p: &Pipeline, plan: &Plan, year: usize) -> f64 {
    p.inputs
        .fleet
        .iter()
        .map(|g| {
            let credit = if g.is_renewable {
                p.config.gep.renewable_credit.get(&g.name).copied().unwrap_or(0.0)
            } else {
                1.0
            };
            plan.mix(year).count(&g.name) as f64 * g.unit_capacity_mw * credit
        })
        .sum()
}

impl Pipeline {
    pub(super) fn report(&self) -> Result<Vec<String>> {
        let summary = self.summary()?;
        let rm = read_plan(
            self.require("rm/plan.json", Stage::SolveRm)?
                .parent()
                .expect("plan dir"),
        )?;
        let rvc = read_plan(
            self.require("rvc/plan.json", Stage::SolveRvc)?
                .parent()
                .expect("plan dir"),
        )?;
        let eval = |plan: &Plan| {
            evaluate_plan_lolh(
                plan,
                &self.inputs.fleet,
                &self.inputs.load,
                &self.config.gep.horizon,
                &self.inputs.profiles,
                &self.config.adequacy,
            )
        };
        let rm_lolh = eval(&rm)?;
        let rvc_lolh = eval(&rvc)?;
        let threshold = self.config.adequacy.lolh_threshold;
        let years = rm.num_years();
        let dir = self.dir("report")?;

        let mut lolh_csv = String::from("year,constrained,zero_margin,rm,rvc,threshold\n");
        for t in 1..=years {
            writeln!(
                lolh_csv,
                "{t},{},{},{},{},{threshold}",
                summary.constrained_years.contains(&t),
                summary.zero_margin_lolh[t - 1],
                rm_lolh[t - 1].lolh,
                rvc_lolh[t - 1].lolh
            )
            .unwrap();
        }
        write_text(&dir.join("lolh_by_year.csv"), lolh_csv)?;

        let mut margin_csv = String::from("year,peak_mw,rm_firm_mw,rm_margin,rvc_firm_mw,rvc_margin\n");
        for t in 1..=years {
            let peak = scale_demand(&self.inputs.load, &self.config.gep.horizon, t)?.peak();
            let a = firm_capacity(self, &rm, t);
            let b = firm_capacity(self, &rvc, t);
            writeln!(margin_csv, "{t},{peak},{a},{},{b},{}", a / peak - 1.0, b / peak - 1.0).unwrap();
        }
        write_text(&dir.join("capacity_margin_by_year.csv"), margin_csv)?;

        let mut out = String::new();
        writeln!(
            out,
            "Generation expansion: margin-based (RM) vs reliability-verified (RVC)"
        )
        .unwrap();
        writeln!(out).unwrap();
        writeln!(out, "LOLH threshold: {threshold} h/year").unwrap();
        writeln!(out, "constrained years: {:?}", summary.constrained_years).unwrap();
        let margins: Vec<String> = summary.rm_margins.iter().map(|m| format_number(*m)).collect();
        writeln!(
            out,
            "RM reserve margins (step {}): [{}]",
            summary.rm_step,
            margins.join(", ")
        )
        .unwrap();
        writeln!(out).unwrap();

        writeln!(out, "LOLH per planning year").unwrap();
        writeln!(out, "{:>6} {:>12} {:>12} {:>12}", "year", "rm=0", "RM", "RVC").unwrap();
        for t in 1..=years {
            let mark = if summary.constrained_years.contains(&t) {
                " *"
            } else {
                ""
            };
            writeln!(
                out,
                "{t:>6} {:>12.4} {:>12.4} {:>12.4}{mark}",
                summary.zero_margin_lolh[t - 1],
                rm_lolh[t - 1].lolh,
                rvc_lolh[t - 1].lolh
            )
            .unwrap();
        }
        writeln!(out, "(* constrained year)").unwrap();
        writeln!(out).unwrap();

        writeln!(out, "Cost breakdown").unwrap();
        writeln!(out, "{:>18} {:>18} {:>18} {:>18}", "", "RM", "RVC", "RVC - RM").unwrap();
        let (a, b) = (&rm.breakdown, &rvc.breakdown);
        for (name, x, y) in [
            ("capital", a.capital, b.capital),
            ("fixed_om", a.fixed_om, b.fixed_om),
            ("variable_carbon", a.variable_carbon, b.variable_carbon),
            ("unserved", a.unserved, b.unserved),
            ("investment", a.investment(), b.investment()),
            ("operational", a.operational(), b.operational()),
            ("total", a.total(), b.total()),
        ] {
            writeln!(out, "{name:>18} {x:>18.6} {y:>18.6} {:>18.6}", y - x).unwrap();
        }
        writeln!(out).unwrap();

        writeln!(out, "Operating units per year (RM / RVC)").unwrap();
        let names: Vec<&str> = self.inputs.fleet.iter().map(|g| g.name.as_str()).collect();
        write!(out, "{:>6}", "year").unwrap();
        for n in &names {
            write!(out, " {n:>14}").unwrap();
        }
        writeln!(out).unwrap();
        for t in 1..=years {
            write!(out, "{t:>6}").unwrap();
            let (m1, m2) = (rm.mix(t), rvc.mix(t));
            for n in &names {
                write!(out, " {:>14}", format!("{} / {}", m1.count(n), m2.count(n))).unwrap();
            }
            writeln!(out).unwrap();
        }
        write_text(&dir.join("report.txt"), out)?;

        let saving = rm.breakdown.total() - rvc.breakdown.total();
        Ok(vec![format!("RVC saves {} relative to RM", format_number(saving))])
    }
}
