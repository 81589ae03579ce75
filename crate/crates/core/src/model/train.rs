//! Balanced batch planning, the two-step training loop, and the
//! propensity-score classifier baseline.

use serde::{Deserialize, Serialize};

use crate::numerics::adam::{AdamConfig, AdamState};
use crate::numerics::matrix::Matrix;
use crate::numerics::nn::{dense_forward, Activation, Dense};
use crate::numerics::rng::RngStream;
use crate::numerics::tape::Tape;

use super::loss::{backtranslation_step, groupclip_loss_tape, reconstruction_loss_tape};
use super::{Ablation, GrooveHyper, GrooveModel, Kernel, Modality, ModelError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub eta: f64,
    pub kernel: Kernel,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub ablation: Ablation,
    /// Encoder hidden widths (k -> h1 -> h2 -> 2d); decoders mirror them.
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1.0,
            beta: 0.1,
            tau: 0.2,
            eta: 1.0,
            kernel: Kernel::Cosine,
            latent_dim: 128,
            batch_size: 256,
            iterations: 2000,
            learning_rate: 1e-3,
            seed: 0,
            ablation: Ablation::Full,
            hidden1: 512,
            hidden2: 256,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self) -> GrooveHyper {
        GrooveHyper {
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
            eta: self.eta,
            kernel: self.kernel,
            latent_dim: self.latent_dim,
        }
    }
}

/// Label-balanced without-replacement batch sampler. The effective batch
/// size is B - (B mod L); every batch holds exactly B_eff / L samples per
/// label per modality, and an epoch never draws more than the minority
/// label count from any label.
#[derive(Debug, Clone)]
pub struct BalancedBatchPlan {
    pub effective_batch: usize,
    pub quota: usize,
    pub batches_per_epoch: usize,
    labels: Vec<usize>,
    pools_x: Vec<Vec<usize>>,
    pools_y: Vec<Vec<usize>>,
    cursor: usize,
    batch_in_epoch: usize,
    rng: RngStream,
}

pub fn plan_balanced_batches(
    labels_x: &[usize],
    labels_y: &[usize],
    batch_size: usize,
    seed: u64,
) -> Result<BalancedBatchPlan> {
    let mut labels: Vec<usize> = labels_x.to_vec();
    labels.sort_unstable();
    labels.dedup();
    if labels.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    for &l in &labels {
        if !labels_y.contains(&l) {
            return Err(ModelError::MissingLabel {
                label: l,
                modality: "Y",
            });
        }
    }
    let mut labels_from_y: Vec<usize> = labels_y.to_vec();
    labels_from_y.sort_unstable();
    labels_from_y.dedup();
    for &l in &labels_from_y {
        if !labels.contains(&l) {
            return Err(ModelError::MissingLabel {
                label: l,
                modality: "X",
            });
        }
    }

    let label_count = labels.len();
    let effective_batch = batch_size - (batch_size % label_count);
    let quota = effective_batch / label_count;
    if quota == 0 {
        return Err(ModelError::BatchTooSmall {
            batch: batch_size,
            labels: label_count,
        });
    }
    let pools_of = |side: &[usize]| -> Vec<Vec<usize>> {
        labels
            .iter()
            .map(|&l| {
                side.iter()
                    .enumerate()
                    .filter(|(_, &sl)| sl == l)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect()
    };
    let pools_x = pools_of(labels_x);
    let pools_y = pools_of(labels_y);
    let n_min = pools_x
        .iter()
        .chain(pools_y.iter())
        .map(Vec::len)
        .min()
        .unwrap();
    if quota > n_min {
        return Err(ModelError::InfeasibleBatch { quota, n_min });
    }
    let batches_per_epoch = n_min / quota;
    Ok(BalancedBatchPlan {
        effective_batch,
        quota,
        batches_per_epoch,
        labels,
        pools_x,
        pools_y,
        cursor: 0,
        // Start exhausted so the first batch opens a fresh shuffled epoch.
        batch_in_epoch: batches_per_epoch,
        rng: RngStream::new(seed),
    })
}

impl BalancedBatchPlan {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn reshuffle(&mut self) {
        for pool in self.pools_x.iter_mut().chain(self.pools_y.iter_mut()) {
            self.rng.shuffle(pool);
        }
        self.cursor = 0;
        self.batch_in_epoch = 0;
    }

    /// Next balanced batch: row indices per modality.
    pub fn next_batch(&mut self) -> (Vec<usize>, Vec<usize>) {
        if self.batch_in_epoch >= self.batches_per_epoch {
            self.reshuffle();
        }
        let start = self.cursor;
        let mut ix = Vec::with_capacity(self.effective_batch);
        let mut iy = Vec::with_capacity(self.effective_batch);
        for pool in &self.pools_x {
            ix.extend_from_slice(&pool[start..start + self.quota]);
        }
        for pool in &self.pools_y {
            iy.extend_from_slice(&pool[start..start + self.quota]);
        }
        self.cursor += self.quota;
        self.batch_in_epoch += 1;
        (ix, iy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLoss {
    pub iteration: usize,
    pub step1: f64,
    pub groupclip: f64,
    pub reconstruction: f64,
    /// Absent when step 2 is skipped (autoencoder-only ablation or
    /// beta = 0).
    pub backtranslation: Option<f64>,
}

#[derive(Debug)]
pub struct TrainResult {
    pub model: GrooveModel,
    pub history: Vec<IterationLoss>,
}

/// Two-step training: step 1 optimizes alpha * GroupCLIP + beta *
/// reconstruction, step 2 optimizes beta * backtranslation on cross-modal
/// pseudo-samples generated in eval mode. One Adam update per step. An
/// optimizer step whose loss weight is exactly zero is skipped outright,
/// so zero-weight configurations leave parameters untouched.
pub fn train(
    x: &Matrix,
    y: &Matrix,
    labels_x: &[usize],
    labels_y: &[usize],
    config: &TrainConfig,
) -> Result<TrainResult> {
    if x.rows() != labels_x.len() || y.rows() != labels_y.len() {
        return Err(ModelError::Numerics(
            crate::numerics::NumericsError::ShapeMismatch {
                context: "train",
                expected: format!("{} / {} labels", x.rows(), y.rows()),
                found: format!("{} / {} labels", labels_x.len(), labels_y.len()),
            },
        ));
    }
    let mut rng = RngStream::new(config.seed);
    let mut model = GrooveModel::new(
        x.cols(),
        y.cols(),
        (config.hidden1, config.hidden2),
        config.hyper(),
        &mut rng,
    );
    let mut plan = plan_balanced_batches(labels_x, labels_y, config.batch_size, rng.derive(1).seed())?;
    let mut batch_rng = rng.derive(2);
    let mut adam = AdamState::new(&model.params(), AdamConfig::with_lr(config.learning_rate));
    let use_groupclip = config.ablation == Ablation::Full && config.alpha != 0.0;
    let use_recon = config.beta != 0.0;
    let use_backtranslation = config.ablation != Ablation::AutoencoderOnly && config.beta != 0.0;

    let mut history = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let (ix, iy) = plan.next_batch();
        let bx = x.select_rows(&ix);
        let by = y.select_rows(&iy);
        let blx: Vec<usize> = ix.iter().map(|&i| labels_x[i]).collect();
        let bly: Vec<usize> = iy.iter().map(|&i| labels_y[i]).collect();

        let mut record = IterationLoss {
            iteration,
            step1: 0.0,
            groupclip: 0.0,
            reconstruction: 0.0,
            backtranslation: None,
        };

        // Step 1: reconstruction and contrastive alignment.
        if use_groupclip || use_recon {
            let mut tape = Tape::new();
            let ids = model.register(&mut tape);
            let bx_id = tape.constant(bx.clone());
            let by_id = tape.constant(by.clone());
            let z1 = model.encode_train(&mut tape, &ids, bx_id, Modality::X, &mut batch_rng)?;
            let z2 = model.encode_train(&mut tape, &ids, by_id, Modality::Y, &mut batch_rng)?;
            let mut terms = Vec::new();
            if use_groupclip {
                let gcl = groupclip_loss_tape(
                    &mut tape,
                    z1,
                    z2,
                    &blx,
                    &bly,
                    config.kernel,
                    config.tau,
                    config.eta,
                )?;
                record.groupclip = tape.value(gcl).scalar();
                terms.push(tape.scale(gcl, config.alpha));
            }
            if use_recon {
                let x_hat = model.decode_train(&mut tape, &ids, z1, Modality::X)?;
                let y_hat = model.decode_train(&mut tape, &ids, z2, Modality::Y)?;
                let rec =
                    reconstruction_loss_tape(&mut tape, &[(bx_id, x_hat), (by_id, y_hat)])?;
                record.reconstruction = tape.value(rec).scalar();
                terms.push(tape.scale(rec, config.beta));
            }
            let mut loss = terms[0];
            for t in &terms[1..] {
                loss = tape.add(loss, *t)?;
            }
            record.step1 = tape.value(loss).scalar();
            if !record.step1.is_finite() {
                return Err(ModelError::Divergence { iteration });
            }
            let grads = tape.backward(loss)?;
            let ordered: Vec<Matrix> = ids
                .param_ids()
                .iter()
                .map(|&id| grads.wrt(&tape, id))
                .collect();
            adam.step(&mut model.params_mut(), &ordered)?;
        }

        // Step 2: on-the-fly backtranslation.
        if use_backtranslation {
            let mut tape = Tape::new();
            let ids = model.register(&mut tape);
            let bt = backtranslation_step(&mut model, &mut tape, &ids, &bx, &by, &mut batch_rng)?;
            let loss = tape.scale(bt, config.beta);
            let value = tape.value(loss).scalar();
            record.backtranslation = Some(tape.value(bt).scalar());
            if !value.is_finite() {
                return Err(ModelError::Divergence { iteration });
            }
            let grads = tape.backward(loss)?;
            let ordered: Vec<Matrix> = ids
                .param_ids()
                .iter()
                .map(|&id| grads.wrt(&tape, id))
                .collect();
            adam.step(&mut model.params_mut(), &ordered)?;
        }

        history.push(record);
    }
    Ok(TrainResult { model, history })
}

/// Propensity-score baseline: per modality, a softmax classifier (two
/// relu layers and a linear head) trained to predict the label; the
/// representation is the pre-softmax logits, one column per label.
#[derive(Debug, Clone)]
pub struct PsClassifier {
    pub l1: Dense,
    pub l2: Dense,
    pub head: Dense,
    /// Sorted distinct labels; logit column j corresponds to classes[j].
    pub classes: Vec<usize>,
}

impl PsClassifier {
    fn new(in_dim: usize, hidden: usize, classes: Vec<usize>, rng: &mut RngStream) -> Self {
        PsClassifier {
            l1: Dense::he(in_dim, hidden, rng),
            l2: Dense::he(hidden, hidden, rng),
            head: Dense::xavier(hidden, classes.len(), rng),
            classes,
        }
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let h = self.l1.forward_eval(x, Activation::Relu)?;
        let h = self.l2.forward_eval(&h, Activation::Relu)?;
        Ok(self.head.forward_eval(&h, Activation::Identity)?)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let mut best = 0;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                self.classes[best]
            })
            .collect())
    }

    fn params(&self) -> Vec<&Matrix> {
        vec![
            &self.l1.weight,
            &self.l1.bias,
            &self.l2.weight,
            &self.l2.bias,
            &self.head.weight,
            &self.head.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.l1.weight,
            &mut self.l1.bias,
            &mut self.l2.weight,
            &mut self.l2.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

#[allow(clippy::too_many_arguments)]
fn train_classifier(
    x: &Matrix,
    labels: &[usize],
    classes: &[usize],
    hidden: usize,
    iterations: usize,
    batch_size: usize,
    lr: f64,
    rng: &mut RngStream,
) -> Result<PsClassifier> {
    let class_index = |l: usize| classes.iter().position(|&c| c == l).unwrap();
    let targets: Vec<usize> = labels.iter().map(|&l| class_index(l)).collect();
    let mut clf = PsClassifier::new(x.cols(), hidden, classes.to_vec(), rng);
    let mut adam = AdamState::new(&clf.params(), AdamConfig::with_lr(lr));
    let n = x.rows();
    let batch = batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n; // trigger shuffle on first use
    for iteration in 0..iterations {
        if cursor + batch > n {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;
        let bx = x.select_rows(idx);
        let bt: Vec<usize> = idx.iter().map(|&i| targets[i]).collect();
        let mut tape = Tape::new();
        let w1 = tape.param(clf.l1.weight.clone());
        let b1 = tape.param(clf.l1.bias.clone());
        let w2 = tape.param(clf.l2.weight.clone());
        let b2 = tape.param(clf.l2.bias.clone());
        let wh = tape.param(clf.head.weight.clone());
        let bh = tape.param(clf.head.bias.clone());
        let xid = tape.constant(bx);
        let h = dense_forward(&mut tape, xid, w1, b1, Activation::Relu)?;
        let h = dense_forward(&mut tape, h, w2, b2, Activation::Relu)?;
        let logits = dense_forward(&mut tape, h, wh, bh, Activation::Identity)?;
        let loss = tape.softmax_cross_entropy(logits, &bt)?;
        if !tape.value(loss).scalar().is_finite() {
            return Err(ModelError::Divergence { iteration });
        }
        let grads = tape.backward(loss)?;
        let ordered: Vec<Matrix> = [w1, b1, w2, b2, wh, bh]
            .iter()
            .map(|&id| grads.wrt(&tape, id))
            .collect();
        adam.step(&mut clf.params_mut(), &ordered)?;
    }
    Ok(clf)
}

/// Width of the propensity-score classifier hidden layers.
pub const PS_HIDDEN: usize = 256;

/// Train one classifier per modality; returns the logit representations
/// for both modalities (width = number of labels) plus the classifiers.
pub fn train_ps_baseline(
    x: &Matrix,
    y: &Matrix,
    labels_x: &[usize],
    labels_y: &[usize],
    config: &TrainConfig,
) -> Result<(Matrix, Matrix, PsClassifier, PsClassifier)> {
    let mut classes: Vec<usize> = labels_x.iter().chain(labels_y.iter()).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ModelError::DegenerateClassification(classes.len()));
    }
    let rng = RngStream::new(config.seed);
    let mut rng_x = rng.derive(1);
    let mut rng_y = rng.derive(2);
    let clf_x = train_classifier(
        x,
        labels_x,
        &classes,
        PS_HIDDEN,
        config.iterations,
        config.batch_size,
        config.learning_rate,
        &mut rng_x,
    )?;
    let clf_y = train_classifier(
        y,
        labels_y,
        &classes,
        PS_HIDDEN,
        config.iterations,
        config.batch_size,
        config.learning_rate,
        &mut rng_y,
    )?;
    let rep_x = clf_x.logits(x)?;
    let rep_y = clf_y.logits(y)?;
    Ok((rep_x, rep_y, clf_x, clf_y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_batch_arithmetic() {
        // B = 10, 3 labels -> B_eff = 9, quota 3.
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let plan = plan_balanced_batches(&labels, &labels, 10, 0).unwrap();
        assert_eq!(plan.effective_batch, 9);
        assert_eq!(plan.quota, 3);
    }

    #[test]
    fn divisible_batch_keeps_full_size() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let plan = plan_balanced_batches(&labels, &labels, 12, 0).unwrap();
        assert_eq!(plan.effective_batch, 12);
    }

    #[test]
    fn batches_are_label_balanced_in_both_modalities() {
        let labels_x: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let labels_y: Vec<usize> = (0..45).map(|i| (i + 1) % 3).collect();
        let mut plan = plan_balanced_batches(&labels_x, &labels_y, 12, 7).unwrap();
        for _ in 0..10 {
            let (ix, iy) = plan.next_batch();
            assert_eq!(ix.len(), 12);
            assert_eq!(iy.len(), 12);
            for side in [(&ix, &labels_x), (&iy, &labels_y)] {
                let mut counts = [0usize; 3];
                for &i in side.0 {
                    counts[side.1[i]] += 1;
                }
                assert_eq!(counts, [4, 4, 4]);
            }
        }
    }

    #[test]
    fn no_repeats_within_an_epoch() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let mut plan = plan_balanced_batches(&labels, &labels, 8, 3).unwrap();
        // n_min = 20 per label, quota 4 -> 5 batches per epoch.
        assert_eq!(plan.batches_per_epoch, 5);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..plan.batches_per_epoch {
            let (ix, _) = plan.next_batch();
            for i in ix {
                assert!(seen.insert(i), "index {i} repeated within epoch");
            }
        }
    }

    #[test]
    fn infeasible_quota_is_rejected() {
        // 4 samples of label 1 but quota would be 5.
        let mut labels = vec![0usize; 20];
        labels.extend(vec![1usize; 4]);
        let err = plan_balanced_batches(&labels, &labels, 10, 0).unwrap_err();
        assert!(matches!(err, ModelError::InfeasibleBatch { quota: 5, n_min: 4 }));
    }

    #[test]
    fn missing_label_is_rejected() {
        let labels_x = vec![0, 0, 1, 1];
        let labels_y = vec![0, 0, 0, 0];
        assert!(matches!(
            plan_balanced_batches(&labels_x, &labels_y, 4, 0),
            Err(ModelError::MissingLabel { label: 1, modality: "Y" })
        ));
    }

    fn toy_data(seed: u64, n_per_label: usize, labels: usize) -> (Matrix, Matrix, Vec<usize>) {
        let mut rng = RngStream::new(seed);
        let n = n_per_label * labels;
        let lab: Vec<usize> = (0..n).map(|i| i % labels).collect();
        let x = Matrix::from_fn(n, 6, |i, j| {
            (lab[i] as f64) * 2.0 + 0.3 * rng.normal() + j as f64 * 0.1
        });
        let y = Matrix::from_fn(n, 5, |i, _| (lab[i] as f64) * -1.5 + 0.3 * rng.normal());
        (x, y, lab)
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            latent_dim: 4,
            batch_size: 16,
            iterations: 60,
            hidden1: 16,
            hidden2: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn autoencoder_only_reconstruction_decreases() {
        let (x, y, labels) = toy_data(1, 8, 4);
        // Full-batch so consecutive losses are comparable.
        let config = TrainConfig {
            ablation: Ablation::AutoencoderOnly,
            iterations: 50,
            batch_size: 32,
            learning_rate: 3e-3,
            ..small_config()
        };
        let result = train(&x, &y, &labels, &labels, &config).unwrap();
        assert_eq!(result.history.len(), 50);
        assert!(result.history.iter().all(|h| h.backtranslation.is_none()));
        let drops = result
            .history
            .windows(2)
            .filter(|w| w[1].reconstruction < w[0].reconstruction)
            .count();
        assert!(drops >= 45, "reconstruction decreased only {drops}/49 times");
    }

    #[test]
    fn zero_weights_leave_parameters_unchanged() {
        let (x, y, labels) = toy_data(2, 6, 3);
        let config = TrainConfig {
            alpha: 0.0,
            beta: 0.0,
            iterations: 7,
            ..small_config()
        };
        let result = train(&x, &y, &labels, &labels, &config).unwrap();
        // Fresh model with the same seed: identical initialization.
        let mut rng = RngStream::new(config.seed);
        let fresh = GrooveModel::new(
            x.cols(),
            y.cols(),
            (config.hidden1, config.hidden2),
            config.hyper(),
            &mut rng,
        );
        for (a, b) in result.model.params().iter().zip(fresh.params()) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (x, y, labels) = toy_data(3, 6, 3);
        let config = TrainConfig {
            iterations: 8,
            ..small_config()
        };
        let a = train(&x, &y, &labels, &labels, &config).unwrap();
        let b = train(&x, &y, &labels, &labels, &config).unwrap();
        for (pa, pb) in a.model.params().iter().zip(b.model.params()) {
            assert_eq!(*pa, pb);
        }
        for (ha, hb) in a.history.iter().zip(&b.history) {
            assert_eq!(ha.step1.to_bits(), hb.step1.to_bits());
        }
    }

    #[test]
    fn overfit_toy_drives_reconstruction_low() {
        // 8 samples at a modest scale; the residual floor is set by the
        // reparameterization variance floor, well below 1e-3 here.
        let mut rng = RngStream::new(4);
        let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
        let x = Matrix::from_fn(8, 6, |i, j| {
            (labels[i] as f64) * 0.8 + 0.12 * rng.normal() + j as f64 * 0.04
        });
        let y = Matrix::from_fn(8, 5, |i, _| (labels[i] as f64) * -0.6 + 0.12 * rng.normal());
        let config = TrainConfig {
            ablation: Ablation::AutoencoderOnly,
            iterations: 2000,
            batch_size: 8,
            learning_rate: 5e-3,
            ..small_config()
        };
        let result = train(&x, &y, &labels, &labels, &config).unwrap();
        let rec = super::super::loss::reconstruction_loss(&result.model, &x, &y).unwrap();
        assert!(rec < 1e-3, "eval reconstruction {rec}");
    }

    #[test]
    fn ps_representation_width_is_label_count() {
        let (x, y, labels) = toy_data(5, 6, 5);
        let config = TrainConfig {
            iterations: 30,
            ..small_config()
        };
        let (rep_x, rep_y, _, _) = train_ps_baseline(&x, &y, &labels, &labels, &config).unwrap();
        assert_eq!(rep_x.cols(), 5);
        assert_eq!(rep_y.cols(), 5);
        assert_eq!(rep_x.rows(), x.rows());
    }

    #[test]
    fn ps_fits_linearly_separable_data() {
        let (x, _, labels) = toy_data(6, 10, 3);
        let config = TrainConfig {
            iterations: 300,
            ..small_config()
        };
        let (_, _, clf_x, _) = train_ps_baseline(&x, &x, &labels, &labels, &config).unwrap();
        let pred = clf_x.predict(&x).unwrap();
        let correct = pred.iter().zip(&labels).filter(|(p, l)| p == l).count();
        assert_eq!(correct, labels.len(), "training accuracy below 1.0");
    }

    #[test]
    fn ps_is_seed_deterministic() {
        let (x, y, labels) = toy_data(7, 5, 3);
        let config = TrainConfig {
            iterations: 25,
            ..small_config()
        };
        let (a, _, _, _) = train_ps_baseline(&x, &y, &labels, &labels, &config).unwrap();
        let (b, _, _, _) = train_ps_baseline(&x, &y, &labels, &labels, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ps_rejects_single_label() {
        let (x, y, _) = toy_data(8, 6, 2);
        let labels = vec![0usize; x.rows()];
        assert!(matches!(
            train_ps_baseline(&x, &y, &labels, &labels, &small_config()),
            Err(ModelError::DegenerateClassification(1))
        ));
    }
}
