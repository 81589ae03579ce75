//! Grid execution.
//!
//! One job per (seed, fold, learner) trains the representation learner
//! once and reuses its embeddings across every aligner in the grid. Each
//! (learner, aligner, fold, seed) cell lands in its own TOML file under
//! `cells/`, keyed deterministically, so interrupted grids resume by
//! skipping existing files. All randomness is derived per cell, so
//! concurrent execution cannot change any result.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{load_toml, save_toml, Dataset};
use crate::eval::{
    barycentric_foscttm, impute, imputation_metrics, train_imputer, trace_metric, KNN_K,
};
use crate::model::{train, train_ps_baseline, Ablation, Kernel, Modality, TrainConfig};
use crate::numerics::matrix::Matrix;
use crate::numerics::par;
use crate::numerics::rng::RngStream;
use crate::ot::{align, AlignerKind};
use crate::split::{make_splits, Fold, SplitMode};

use super::{write_reports, BenchConfig, BenchError, LearnerKind, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub learner: String,
    pub aligner: String,
    pub seed: u64,
    pub fold: usize,
    pub held_out_label: Option<usize>,
    pub plan_converged: bool,
    pub trace: f64,
    pub foscttm: f64,
    pub mse: f64,
    pub wd: f64,
    pub cos_sim: f64,
    pub knn_recall: f64,
    pub knn_pr: f64,
    pub knn_roc: f64,
}

impl CellRecord {
    pub fn method(&self) -> String {
        format!("{}+{}", self.learner, self.aligner)
    }

    pub fn fold_id(&self) -> String {
        format!("s{}_f{}", self.seed, self.fold)
    }

    pub fn metric_values(&self) -> [(&'static str, f64); 8] {
        [
            ("trace", self.trace),
            ("foscttm", self.foscttm),
            ("mse", self.mse),
            ("wd", self.wd),
            ("cos_sim", self.cos_sim),
            ("knn_recall", self.knn_recall),
            ("knn_pr", self.knn_pr),
            ("knn_roc", self.knn_roc),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub key: String,
    pub error: String,
}

#[derive(Debug)]
pub struct BenchOutcome {
    pub cells: Vec<CellRecord>,
    pub failures: Vec<CellFailure>,
    pub report: super::ReportFiles,
}

fn cell_stem(split: &SplitMode, learner: LearnerKind, aligner: AlignerKind, seed: u64, fold: usize) -> String {
    format!(
        "{}__{}__{}__s{}_f{}",
        learner.name(),
        aligner.name(),
        split.name(),
        seed,
        fold
    )
}

/// Seed for one training job, mixed from the replicate seed, fold and
/// learner so every cell is independently reproducible.
fn job_seed(base: u64, seed: u64, fold: usize, learner: LearnerKind) -> u64 {
    RngStream::new(base)
        .derive(seed)
        .derive(fold as u64)
        .derive(learner as u64)
        .seed()
}

/// Eval-mode representations of the full X and Y matrices after training
/// the learner on the fold's train rows.
fn learner_embeddings(
    learner: LearnerKind,
    dataset: &Dataset,
    tx_train: &[usize],
    ty_train: &[usize],
    train_config: &TrainConfig,
) -> Result<(Matrix, Matrix)> {
    let x_train = dataset.x.select_rows(tx_train);
    let y_train = dataset.y.select_rows(ty_train);
    let lx: Vec<usize> = tx_train.iter().map(|&i| dataset.labels_x[i]).collect();
    let ly: Vec<usize> = ty_train.iter().map(|&i| dataset.labels_y[i]).collect();
    match learner {
        LearnerKind::Ps => {
            let (_, _, clf_x, clf_y) = train_ps_baseline(&x_train, &y_train, &lx, &ly, train_config)?;
            Ok((clf_x.logits(&dataset.x)?, clf_y.logits(&dataset.y)?))
        }
        _ => {
            let mut config = train_config.clone();
            match learner {
                LearnerKind::GrooveCosine => config.kernel = Kernel::Cosine,
                LearnerKind::GrooveTdist => config.kernel = Kernel::TDist,
                LearnerKind::GrooveNoGroupclip => config.ablation = Ablation::NoGroupclip,
                LearnerKind::GrooveAutoencoderOnly => config.ablation = Ablation::AutoencoderOnly,
                LearnerKind::Ps => unreachable!(),
            }
            let result = train(&x_train, &y_train, &lx, &ly, &config)?;
            Ok((
                result.model.encode_eval(&dataset.x, Modality::X)?,
                result.model.encode_eval(&dataset.y, Modality::Y)?,
            ))
        }
    }
}

struct JobOutput {
    cells: Vec<CellRecord>,
    failures: Vec<CellFailure>,
}

/// Run every missing aligner cell for one (seed, fold, learner) job.
#[allow(clippy::too_many_arguments)]
fn run_job(
    config: &BenchConfig,
    dataset: &Dataset,
    fold: &Fold,
    fold_idx: usize,
    seed: u64,
    learner: LearnerKind,
    needed: &[AlignerKind],
    cells_dir: &Path,
) -> JobOutput {
    let mut out = JobOutput {
        cells: Vec::new(),
        failures: Vec::new(),
    };
    let pair = dataset
        .pair_x_to_y
        .as_ref()
        .expect("runner requires pairing; validated upstream");
    let tx_train = &fold.train;
    let tx_test = &fold.test;
    let ty_train: Vec<usize> = tx_train.iter().map(|&i| pair[i]).collect();
    let ty_test: Vec<usize> = tx_test.iter().map(|&i| pair[i]).collect();

    let mut train_config = config.train.clone();
    train_config.seed = job_seed(config.train.seed, seed, fold_idx, learner);

    let fail_all = |out: &mut JobOutput, message: String| {
        for &aligner in needed {
            let stem = cell_stem(&config.split, learner, aligner, seed, fold_idx);
            let failure = CellFailure {
                key: stem.clone(),
                error: message.clone(),
            };
            let _ = save_toml(&cells_dir.join(format!("{stem}.error.toml")), &failure, "cell failure");
            out.failures.push(failure);
        }
    };

    let (z1, z2) = match learner_embeddings(learner, dataset, tx_train, &ty_train, &train_config) {
        Ok(z) => z,
        Err(e) => {
            log::error!("learner {} failed on seed {seed} fold {fold_idx}: {e}", learner.name());
            fail_all(&mut out, e.to_string());
            return out;
        }
    };
    let z1_train = z1.select_rows(tx_train);
    let z2_train = z2.select_rows(&ty_train);
    let z1_test = z1.select_rows(tx_test);
    let z2_test = z2.select_rows(&ty_test);
    let labels_train: Vec<usize> = tx_train.iter().map(|&i| dataset.labels_x[i]).collect();
    let labels_test: Vec<usize> = tx_test.iter().map(|&i| dataset.labels_x[i]).collect();
    let x_train = dataset.x.select_rows(tx_train);
    let x_test = dataset.x.select_rows(tx_test);
    let y_train = dataset.y.select_rows(&ty_train);
    let y_test = dataset.y.select_rows(&ty_test);

    for (aligner_idx, &aligner) in needed.iter().enumerate() {
        let stem = cell_stem(&config.split, learner, aligner, seed, fold_idx);
        let spec = config.align.spec(aligner);
        let cell = (|| -> Result<CellRecord> {
            // Matching metrics on the held-out embeddings, rows ordered
            // by the true pairing.
            let plan_test = align(
                &spec,
                &z1_test,
                &z2_test,
                Some(&labels_test),
                Some(&labels_test),
            )?;
            let trace = trace_metric(&plan_test.coupling)?;
            let foscttm = barycentric_foscttm(&plan_test.coupling, &z1_test, &z2_test)?;

            // Imputer trained through the train-split plan, predicting
            // modality X from modality Y.
            let plan_train = align(
                &spec,
                &z1_train,
                &z2_train,
                Some(&labels_train),
                Some(&labels_train),
            )?;
            let mut imputer_config = config.imputer;
            imputer_config.seed = RngStream::new(train_config.seed)
                .derive(1000 + aligner_idx as u64)
                .seed();
            let imputer = train_imputer(&plan_train.coupling, &y_train, &x_train, &imputer_config)?;
            let x_hat = impute(&imputer, &y_test)?;
            let metrics = imputation_metrics(&x_test, &x_hat, KNN_K)?;

            Ok(CellRecord {
                learner: learner.name().to_string(),
                aligner: aligner.name().to_string(),
                seed,
                fold: fold_idx,
                held_out_label: fold.held_out_label,
                plan_converged: plan_test.converged && plan_train.converged,
                trace,
                foscttm,
                mse: metrics.mse,
                wd: metrics.wd,
                cos_sim: metrics.cos_sim,
                knn_recall: metrics.knn_recall,
                knn_pr: metrics.knn_pr,
                knn_roc: metrics.knn_roc,
            })
        })();
        match cell {
            Ok(record) => {
                if let Err(e) = save_toml(&cells_dir.join(format!("{stem}.toml")), &record, "cell") {
                    log::error!("failed to persist cell {stem}: {e}");
                }
                out.cells.push(record);
            }
            Err(e) => {
                log::error!("cell {stem} failed: {e}");
                let failure = CellFailure {
                    key: stem.clone(),
                    error: e.to_string(),
                };
                let _ = save_toml(
                    &cells_dir.join(format!("{stem}.error.toml")),
                    &failure,
                    "cell failure",
                );
                out.failures.push(failure);
            }
        }
    }
    out
}

fn dataset_for_seed(config: &BenchConfig, seed: u64) -> Result<Dataset> {
    let dataset = match (&config.sim, &config.dataset_dir) {
        (Some(sim), None) => {
            let mut sim = sim.clone();
            sim.seed = seed;
            Dataset::from_simulated(&crate::sim::simulate(&sim)?)
        }
        (None, Some(dir)) => Dataset::load(dir)?,
        _ => unreachable!("validated"),
    };
    if dataset.pair_x_to_y.is_none() {
        return Err(BenchError::MissingPairing);
    }
    Ok(dataset)
}

/// Execute the grid, skipping cells whose files already exist, then emit
/// the CSV and fixed-width reports.
pub fn run_benchmark(config: &BenchConfig, out_dir: &Path) -> Result<BenchOutcome> {
    config.validate()?;
    let cells_dir = out_dir.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|source| BenchError::Io {
        path: cells_dir.clone(),
        source,
    })?;
    save_toml(&out_dir.join("grid.toml"), config, "grid manifest")?;

    // Materialize datasets and split plans per replicate seed.
    let mut datasets = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let dataset = dataset_for_seed(config, seed)?;
        let split_seed = RngStream::new(seed).derive(0xF01D).seed();
        let plan = make_splits(&dataset.labels_x, config.split, split_seed)?;
        datasets.push((seed, dataset, plan));
    }

    // Job list: one entry per (seed, fold, learner) with its missing
    // aligner cells.
    struct Job<'a> {
        seed: u64,
        fold_idx: usize,
        fold: &'a Fold,
        dataset: &'a Dataset,
        learner: LearnerKind,
        needed: Vec<AlignerKind>,
    }
    let mut jobs = Vec::new();
    let mut existing: Vec<PathBuf> = Vec::new();
    for (seed, dataset, plan) in &datasets {
        for (fold_idx, fold) in plan.folds.iter().enumerate() {
            for &learner in &config.learners {
                let mut needed = Vec::new();
                for &aligner in &config.aligners {
                    let stem = cell_stem(&config.split, learner, aligner, *seed, fold_idx);
                    let path = cells_dir.join(format!("{stem}.toml"));
                    if path.exists() {
                        existing.push(path);
                    } else {
                        needed.push(aligner);
                    }
                }
                if !needed.is_empty() {
                    jobs.push(Job {
                        seed: *seed,
                        fold_idx,
                        fold,
                        dataset,
                        learner,
                        needed,
                    });
                }
            }
        }
    }
    log::info!(
        "benchmark grid: {} jobs to run, {} cells already present",
        jobs.len(),
        existing.len()
    );

    let outputs: Vec<JobOutput> = par::map_indexed(jobs.len(), |j| {
        let job = &jobs[j];
        run_job(
            config,
            job.dataset,
            job.fold,
            job.fold_idx,
            job.seed,
            job.learner,
            &job.needed,
            &cells_dir,
        )
    });

    let mut cells: Vec<CellRecord> = Vec::new();
    let mut failures: Vec<CellFailure> = Vec::new();
    for path in existing {
        cells.push(load_toml(&path)?);
    }
    for output in outputs {
        cells.extend(output.cells);
        failures.extend(output.failures);
    }
    // Deterministic report order regardless of which cells were resumed.
    cells.sort_by(|a, b| {
        (&a.learner, &a.aligner, a.seed, a.fold).cmp(&(&b.learner, &b.aligner, b.seed, b.fold))
    });
    failures.sort_by(|a, b| a.key.cmp(&b.key));

    let report = write_reports(out_dir, &cells, &failures)?;
    Ok(BenchOutcome {
        cells,
        failures,
        report,
    })
}
