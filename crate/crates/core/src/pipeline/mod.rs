//! Stage-by-stage orchestration with artifacts persisted under one output directory.
//!
//! Stages run in the order of [`Stage::ALL`]. Each stage reads what earlier
//! stages wrote and fails with [`Error::MissingArtifact`] when an input file
//! is absent, naming the stage that produces it.
//!
//! ```text
//! sweep/         year_<t>.csv, year_<t>.json, summary.json
//! datasets/      year_<t>.csv, year_<t>.meta.json, year_<t>.summary.txt
//! trees/         year_<t>.json, training.csv
//! disjunctions/  year_<t>.json, year_<t>.validation.json
//! models/        rvc.mps, encoding.csv, rm.mps
//! rm/, rvc/      plan.csv, plan.json, objective.txt, solution.csv, lolh.csv
//! report/        report.txt, lolh_by_year.csv, capacity_margin_by_year.csv
//! ```

mod config;
mod report;
mod stages;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{parse_override, Inputs, RunConfig};
pub use stages::{StepRecord, SweepSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Sweep,
    Label,
    Train,
    Extract,
    Encode,
    SolveRm,
    SolveRvc,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Sweep,
        Stage::Label,
        Stage::Train,
        Stage::Extract,
        Stage::Encode,
        Stage::SolveRm,
        Stage::SolveRvc,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Sweep => "sweep",
            Stage::Label => "label",
            Stage::Train => "train",
            Stage::Extract => "extract",
            Stage::Encode => "encode",
            Stage::SolveRm => "solve-rm",
            Stage::SolveRvc => "solve-rvc",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// What a stage did, for console output.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub notes: Vec<String>,
}

/// A loaded run: configuration, inputs and the output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: RunConfig,
    pub inputs: Inputs,
    pub out_dir: PathBuf,
}

impl Pipeline {
    /// Loads `config_path`; `out` and `seed` take precedence over the file.
    pub fn open(
        config_path: impl AsRef<Path>,
        overrides: &[(String, String)],
        out: Option<PathBuf>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let (mut config, base) = RunConfig::load(config_path, overrides)?;
        if let Some(seed) = seed {
            config.seed = seed;
        }
        let out_dir = out.unwrap_or_else(|| base.join(&config.out_dir));
        Self::new(config, &base, out_dir)
    }

    /// Paths in `config` are resolved against `base`.
    pub fn new(mut config: RunConfig, base: &Path, out_dir: PathBuf) -> Result<Self> {
        config.adequacy.seed = config.seed;
        config.sampler.seed = config.seed;
        config.wodt.seed = config.seed;
        config.sweep.lolh_threshold = config.adequacy.lolh_threshold;
        config.validate()?;
        let inputs = Inputs::load(&config, base)?;
        config.gep.validate(&inputs.fleet, inputs.load.len())?;
        Ok(Self {
            config,
            inputs,
            out_dir,
        })
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageReport> {
        log::info!("stage {stage}");
        let notes = match stage {
            Stage::Sweep => self.sweep(),
            Stage::Label => self.label(),
            Stage::Train => self.train(),
            Stage::Extract => self.extract(),
            Stage::Encode => self.encode(),
            Stage::SolveRm => self.solve_rm(),
            Stage::SolveRvc => self.solve_rvc(),
            Stage::Report => self.report(),
        }
        .map_err(|e| Error::Stage {
            stage: stage.name().into(),
            source: Box::new(e),
        })?;
        Ok(StageReport { stage, notes })
    }

    /// Runs every stage in order, stopping at the first failure.
    pub fn run_all(&self) -> Result<Vec<StageReport>> {
        Stage::ALL.into_iter().map(|s| self.run_stage(s)).collect()
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.out_dir.join(name);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Ok(d)
    }

    /// Path of an artifact that `producer` must already have written.
    fn require(&self, rel: impl AsRef<Path>, producer: Stage) -> Result<PathBuf> {
        let p = self.out_dir.join(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                path: p,
                stage: producer.name().into(),
            })
        }
    }
}

fn write_text(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, text + "\n")
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}
