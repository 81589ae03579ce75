//! Combinatorial learner x aligner benchmark: split generation, grid
//! execution with per-cell resume, report emission, and the tau/beta
//! sweep.

pub mod report;
pub mod runner;
pub mod sweep;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigError;
use crate::eval::imputer::ImputerConfig;
use crate::eval::EvalError;
use crate::model::train::TrainConfig;
use crate::model::ModelError;
use crate::numerics::NumericsError;
use crate::ot::{AlignerKind, OtError};
use crate::sim::{SimConfig, SimError};
use crate::split::{SplitError, SplitMode};

pub use report::{write_reports, ReportFiles};
pub use runner::{run_benchmark, BenchOutcome, CellRecord};
pub use sweep::{run_sweep, SweepConfig, SweepRow};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error("benchmark requires a true-pair map (truth.grvm) for matching metrics")]
    MissingPairing,
    #[error("no completed cells; nothing to report")]
    EmptyResults,
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    GrooveCosine,
    GrooveTdist,
    GrooveNoGroupclip,
    GrooveAutoencoderOnly,
    Ps,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::GrooveCosine,
        LearnerKind::GrooveTdist,
        LearnerKind::GrooveNoGroupclip,
        LearnerKind::GrooveAutoencoderOnly,
        LearnerKind::Ps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::GrooveCosine => "groove_cosine",
            LearnerKind::GrooveTdist => "groove_tdist",
            LearnerKind::GrooveNoGroupclip => "groove_no_groupclip",
            LearnerKind::GrooveAutoencoderOnly => "groove_autoencoder_only",
            LearnerKind::Ps => "ps",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "groove_cosine" => LearnerKind::GrooveCosine,
            "groove_tdist" => LearnerKind::GrooveTdist,
            "groove_no_groupclip" => LearnerKind::GrooveNoGroupclip,
            "groove_autoencoder_only" => LearnerKind::GrooveAutoencoderOnly,
            "ps" => LearnerKind::Ps,
            other => {
                return Err(BenchError::InvalidConfig(format!(
                    "unknown learner {other:?}"
                )))
            }
        })
    }
}

/// Alignment solver settings shared by every aligner in a grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignSettings {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for AlignSettings {
    fn default() -> Self {
        AlignSettings {
            epsilon: 0.05,
            max_iterations: 10_000,
            tolerance: 1e-9,
        }
    }
}

impl AlignSettings {
    pub fn spec(&self, kind: AlignerKind) -> crate::ot::AlignSpec {
        crate::ot::AlignSpec {
            kind,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Grid description: every (learner, aligner, fold, seed) combination is
/// one cell, run exactly once and stored under a deterministic key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub learners: Vec<LearnerKind>,
    pub aligners: Vec<AlignerKind>,
    pub split: SplitMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Simulate a dataset per replicate seed...
    pub sim: Option<SimConfig>,
    /// ...or load one fixed dataset directory.
    pub dataset_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub imputer: ImputerConfig,
    #[serde(default)]
    pub align: AlignSettings,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learners.is_empty() || self.aligners.is_empty() {
            return Err(BenchError::InvalidConfig(
                "learners and aligners must be non-empty".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::InvalidConfig("seeds must be non-empty".into()));
        }
        match (&self.sim, &self.dataset_dir) {
            (Some(_), Some(_)) => Err(BenchError::InvalidConfig(
                "provide either [sim] or dataset_dir, not both".into(),
            )),
            (None, None) => Err(BenchError::InvalidConfig(
                "provide a [sim] section or dataset_dir".into(),
            )),
            _ => Ok(()),
        }
    }
}
