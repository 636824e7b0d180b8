use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} ({location}): {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("duplicate generator type name `{0}`")]
    DuplicateName(String),

    #[error("invalid value for `{field}`: {message}")]
    Invariant { field: String, message: String },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("year {year} outside planning horizon 1..={years}")]
    YearOutOfRange { year: usize, years: usize },

    #[error("unknown generator type `{0}`")]
    UnknownType(String),

    #[error("renewable type `{name}` has no capacity-factor series `{profile}`")]
    MissingProfile { name: String, profile: String },

    #[error("expansion model infeasible with reserve margins {margins:?}")]
    InfeasibleMargins { margins: Vec<f64> },

    #[error("margin sweep for step {step} did not converge within {iterations} iterations")]
    SweepNotConverged { step: f64, iterations: usize },

    #[error("optimization model is infeasible: {0}")]
    Infeasible(String),

    #[error("solver stopped without an optimal solution: {0}")]
    SolverLimit(String),

    #[error("empty grid: feature `{feature}` has lower bound {lower} above upper bound {upper}")]
    EmptyGrid { feature: String, lower: i64, upper: i64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value encountered at iterate {iterate:?}")]
    NonFinite { iterate: Vec<f64> },

    #[error("year {year}: tree has no reliable leaves inside the feature box")]
    NoFeasibleRegion { year: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("feature names do not match for year {year}: expected {expected:?}, found {found:?}")]
    FeatureMismatch {
        year: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {path} (produced by the `{stage}` stage)")]
    MissingArtifact { path: PathBuf, stage: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    /// Process exit code: 2 for invalid input, 3 when no feasible or
    /// reliable plan exists, 4 when a prerequisite artifact is missing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_)
            | Error::InfeasibleMargins { .. }
            | Error::SweepNotConverged { .. }
            | Error::NoFeasibleRegion { .. }
            | Error::SolverLimit(_) => 3,
            Error::MissingArtifact { .. } => 4,
            Error::Sample { source, .. } | Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }
}
