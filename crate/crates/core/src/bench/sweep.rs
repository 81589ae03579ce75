//! Grid sweep over the contrastive temperature (tau) and the
//! reconstruction/backtranslation weight (beta): matching metrics per
//! setting, averaged over the shared-proportion settings and replicate
//! seeds, emitted as a plain CSV suitable for contour plotting.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{save_toml, Dataset};
use crate::eval::{barycentric_foscttm, trace_metric};
use crate::model::{train, Modality, TrainConfig};
use crate::numerics::par;
use crate::numerics::rng::RngStream;
use crate::ot::{align, AlignerKind};
use crate::sim::make_setting;
use crate::split::{make_splits, SplitMode};

use super::{AlignSettings, BenchError, Result};

fn default_proportions() -> Vec<u32> {
    vec![100, 80, 50]
}

fn default_aligner() -> AlignerKind {
    AlignerKind::LabeledEot
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default = "default_proportions")]
    pub proportions: Vec<u32>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_aligner")]
    pub aligner: AlignerKind,
    /// Cells per condition for the sweep simulations (smaller than the
    /// benchmark default keeps sweeps tractable).
    pub cells_per_condition: Option<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub align: AlignSettings,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.betas.is_empty() {
            return Err(BenchError::InvalidConfig(
                "taus and betas must be non-empty".into(),
            ));
        }
        if self.proportions.is_empty() || self.seeds.is_empty() {
            return Err(BenchError::InvalidConfig(
                "proportions and seeds must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub beta: f64,
    pub trace: f64,
    pub foscttm: f64,
}

/// One (tau, beta, proportion, seed) evaluation: simulate, split 80-20,
/// train the cosine-kernel learner, align the held-out embeddings, score
/// matching metrics.
fn sweep_cell(
    config: &SweepConfig,
    tau: f64,
    beta: f64,
    proportion: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut sim = make_setting(proportion, seed)?;
    if let Some(cells) = config.cells_per_condition {
        sim.cells_per_condition = cells;
    }
    let dataset = Dataset::from_simulated(&crate::sim::simulate(&sim)?);
    let pair = dataset.pair_x_to_y.clone().expect("simulated data is paired");
    let split_seed = RngStream::new(seed).derive(0xF01D).seed();
    let plan = make_splits(&dataset.labels_x, SplitMode::Holdout8020, split_seed)?;
    let fold = &plan.folds[0];
    let ty_train: Vec<usize> = fold.train.iter().map(|&i| pair[i]).collect();
    let ty_test: Vec<usize> = fold.test.iter().map(|&i| pair[i]).collect();

    let mut train_config = config.train.clone();
    train_config.tau = tau;
    train_config.beta = beta;
    train_config.seed = RngStream::new(config.train.seed)
        .derive(seed)
        .derive(proportion as u64)
        .seed();
    let lx: Vec<usize> = fold.train.iter().map(|&i| dataset.labels_x[i]).collect();
    let ly: Vec<usize> = ty_train.iter().map(|&i| dataset.labels_y[i]).collect();
    let result = train(
        &dataset.x.select_rows(&fold.train),
        &dataset.y.select_rows(&ty_train),
        &lx,
        &ly,
        &train_config,
    )?;
    let z1 = result
        .model
        .encode_eval(&dataset.x.select_rows(&fold.test), Modality::X)?;
    let z2 = result
        .model
        .encode_eval(&dataset.y.select_rows(&ty_test), Modality::Y)?;
    let labels_test: Vec<usize> = fold.test.iter().map(|&i| dataset.labels_x[i]).collect();
    let spec = config.align.spec(config.aligner);
    let plan = align(&spec, &z1, &z2, Some(&labels_test), Some(&labels_test))?;
    Ok((
        trace_metric(&plan.coupling)?,
        barycentric_foscttm(&plan.coupling, &z1, &z2)?,
    ))
}

/// Run the sweep and write `sweep.csv` (averages per tau/beta cell) plus
/// `sweep_cells.csv` (every underlying evaluation).
pub fn run_sweep(config: &SweepConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| BenchError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    save_toml(&out_dir.join("sweep_config.toml"), config, "sweep manifest")?;

    struct Cell {
        tau: f64,
        beta: f64,
        proportion: u32,
        seed: u64,
    }
    let mut grid = Vec::new();
    for &tau in &config.taus {
        for &beta in &config.betas {
            for &proportion in &config.proportions {
                for &seed in &config.seeds {
                    grid.push(Cell {
                        tau,
                        beta,
                        proportion,
                        seed,
                    });
                }
            }
        }
    }
    let results: Vec<Result<(f64, f64)>> = par::map_indexed(grid.len(), |i| {
        let c = &grid[i];
        sweep_cell(config, c.tau, c.beta, c.proportion, c.seed)
    });

    let mut detail = String::from("tau,beta,proportion,seed,trace,foscttm\n");
    let mut rows = Vec::new();
    let per_cell = config.proportions.len() * config.seeds.len();
    for (block, chunk) in results.chunks(per_cell).enumerate() {
        let tau = config.taus[block / config.betas.len()];
        let beta = config.betas[block % config.betas.len()];
        let mut traces = Vec::new();
        let mut foscs = Vec::new();
        for (offset, result) in chunk.iter().enumerate() {
            let cell = &grid[block * per_cell + offset];
            match result {
                Ok((trace, fosc)) => {
                    detail.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        cell.tau, cell.beta, cell.proportion, cell.seed, trace, fosc
                    ));
                    traces.push(*trace);
                    foscs.push(*fosc);
                }
                Err(e) => {
                    log::error!(
                        "sweep cell tau={} beta={} proportion={} seed={} failed: {e}",
                        cell.tau,
                        cell.beta,
                        cell.proportion,
                        cell.seed
                    );
                }
            }
        }
        if !traces.is_empty() {
            rows.push(SweepRow {
                tau,
                beta,
                trace: traces.iter().sum::<f64>() / traces.len() as f64,
                foscttm: foscs.iter().sum::<f64>() / foscs.len() as f64,
            });
        }
    }

    let mut summary = String::from("tau,beta,trace,foscttm\n");
    for row in &rows {
        summary.push_str(&format!(
            "{},{},{},{}\n",
            row.tau, row.beta, row.trace, row.foscttm
        ));
    }
    let write = |name: &str, contents: &str| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|source| BenchError::Io { path, source })
    };
    write("sweep.csv", &summary)?;
    write("sweep_cells.csv", &detail)?;
    Ok(rows)
}
