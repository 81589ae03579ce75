//! Structured-text (TOML) configuration files and the on-disk dataset
//! layout.
//!
//! A dataset directory holds `X.grvm`, `Y.grvm`, `labels_x.txt`,
//! `labels_y.txt` (one integer per line), optionally `truth.grvm` (a
//! one-column matrix; entry k is the Y row truly paired with X row k),
//! and a `manifest.toml` describing how the data was produced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};
use thiserror::Error;

use crate::numerics::grvm;
use crate::numerics::matrix::Matrix;
use crate::numerics::NumericsError;
use crate::sim::SimulatedDataset;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("failed to serialize {context}: {message}")]
    Serialize {
        context: &'static str,
        message: String,
    },
    #[error("inconsistent dataset: {0}")]
    InconsistentDataset(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn save_toml<T: Serialize>(path: &Path, value: &T, context: &'static str) -> Result<()> {
    let text = toml::to_string_pretty(value).map_err(|e| ConfigError::Serialize {
        context,
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|source| ConfigError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Two observed matrices with one integer label per sample per modality,
/// plus the optional true-pair map used by matching metrics.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub labels_x: Vec<usize>,
    pub labels_y: Vec<usize>,
    /// pair_x_to_y[k] = Y row truly paired with X row k.
    pub pair_x_to_y: Option<Vec<usize>>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.x.rows() != self.labels_x.len() {
            return Err(ConfigError::InconsistentDataset(format!(
                "X has {} rows but {} labels",
                self.x.rows(),
                self.labels_x.len()
            )));
        }
        if self.y.rows() != self.labels_y.len() {
            return Err(ConfigError::InconsistentDataset(format!(
                "Y has {} rows but {} labels",
                self.y.rows(),
                self.labels_y.len()
            )));
        }
        if let Some(pair) = &self.pair_x_to_y {
            if pair.len() != self.x.rows() {
                return Err(ConfigError::InconsistentDataset(format!(
                    "pair map has {} entries for {} X rows",
                    pair.len(),
                    self.x.rows()
                )));
            }
            for (k, &j) in pair.iter().enumerate() {
                if j >= self.y.rows() {
                    return Err(ConfigError::InconsistentDataset(format!(
                        "pair map sends X row {k} to Y row {j}, out of range"
                    )));
                }
                if self.labels_x[k] != self.labels_y[j] {
                    return Err(ConfigError::InconsistentDataset(format!(
                        "paired rows {k} and {j} carry labels {} and {}",
                        self.labels_x[k], self.labels_y[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_simulated(ds: &SimulatedDataset) -> Dataset {
        Dataset {
            x: ds.x.clone(),
            y: ds.y.clone(),
            labels_x: ds.labels_x.clone(),
            labels_y: ds.labels_y.clone(),
            pair_x_to_y: Some(ds.truth.pair_x_to_y()),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| ConfigError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        grvm::write_matrix(&dir.join("X.grvm"), &self.x)?;
        grvm::write_matrix(&dir.join("Y.grvm"), &self.y)?;
        grvm::write_labels(&dir.join("labels_x.txt"), &self.labels_x)?;
        grvm::write_labels(&dir.join("labels_y.txt"), &self.labels_y)?;
        if let Some(pair) = &self.pair_x_to_y {
            let col: Vec<f64> = pair.iter().map(|&v| v as f64).collect();
            grvm::write_matrix(&dir.join("truth.grvm"), &Matrix::column(&col))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let x = grvm::read_matrix(&dir.join("X.grvm"))?;
        let y = grvm::read_matrix(&dir.join("Y.grvm"))?;
        let labels_x = grvm::read_labels(&dir.join("labels_x.txt"))?;
        let labels_y = grvm::read_labels(&dir.join("labels_y.txt"))?;
        let truth_path = dir.join("truth.grvm");
        let pair_x_to_y = if truth_path.exists() {
            let m = grvm::read_matrix(&truth_path)?;
            if m.cols() != 1 {
                return Err(ConfigError::InconsistentDataset(format!(
                    "truth.grvm must be one column, got {}",
                    m.cols()
                )));
            }
            Some(m.data().iter().map(|&v| v as usize).collect())
        } else {
            None
        };
        let ds = Dataset {
            x,
            y,
            labels_x,
            labels_y,
            pair_x_to_y,
        };
        ds.validate()?;
        Ok(ds)
    }
}
