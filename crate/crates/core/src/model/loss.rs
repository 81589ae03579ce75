//! GroupCLIP, reconstruction, and backtranslation losses.
//!
//! GroupCLIP treats every opposite-modality sample with the anchor's label
//! as a positive and normalizes over all opposite-modality candidates. The
//! cosine kernel goes through a temperature-scaled log-sum-exp; the
//! t-distribution kernel already maps to (0, 1] with its own temperature,
//! so no exponential transform is applied.

use std::sync::Arc;

use crate::numerics::matrix::Matrix;
use crate::numerics::rng::RngStream;
use crate::numerics::tape::{NodeId, Tape};

use super::{GrooveModel, Kernel, Modality, ModelError, Result, MIN_COSINE_NORM};

/// Scalar similarity kernel. Cosine lands in [-1, 1] and is undefined for
/// zero vectors; the t-distribution kernel lands in (0, 1].
pub fn similarity(kind: Kernel, a: &[f64], b: &[f64], tau: f64, eta: f64) -> Result<f64> {
    assert_eq!(a.len(), b.len(), "similarity inputs must share a width");
    match kind {
        Kernel::Cosine => {
            let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na < MIN_COSINE_NORM || nb < MIN_COSINE_NORM {
                return Err(ModelError::UndefinedSimilarity);
            }
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            Ok(dot / (na * nb))
        }
        Kernel::TDist => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            Ok((1.0 + d2 / (tau * eta)).powf(-(eta + 1.0) / 2.0))
        }
    }
}

/// Positive-pair mask: mask[i][j] = 1 when labels_a[i] == labels_b[j].
/// Errors with the offending label when an anchor has no positives.
fn positives_mask(labels_a: &[usize], labels_b: &[usize]) -> Result<Matrix> {
    let mut mask = Matrix::zeros(labels_a.len(), labels_b.len());
    for (i, &la) in labels_a.iter().enumerate() {
        let mut any = false;
        for (j, &lb) in labels_b.iter().enumerate() {
            if la == lb {
                mask.set(i, j, 1.0);
                any = true;
            }
        }
        if !any {
            return Err(ModelError::MissingPositives { label: la });
        }
    }
    Ok(mask)
}

/// One anchor direction: mean over anchors of
/// -log(sum_positives k / sum_candidates k).
fn groupclip_direction(
    tape: &mut Tape,
    anchors: NodeId,
    candidates: NodeId,
    mask: Arc<Matrix>,
    kernel: Kernel,
    tau: f64,
    eta: f64,
) -> Result<NodeId> {
    let per_anchor = match kernel {
        Kernel::Cosine => {
            let an = tape
                .row_normalize(anchors, MIN_COSINE_NORM)
                .map_err(|_| ModelError::UndefinedSimilarity)?;
            let cn = tape
                .row_normalize(candidates, MIN_COSINE_NORM)
                .map_err(|_| ModelError::UndefinedSimilarity)?;
            let sims = tape.matmul_nt(an, cn)?;
            let scaled = tape.scale(sims, 1.0 / tau);
            let all = tape.log_sum_exp_rows(scaled, None)?;
            let pos = tape.log_sum_exp_rows(scaled, Some(mask))?;
            tape.sub(all, pos)?
        }
        Kernel::TDist => {
            let d2 = tape.pairwise_sq_dist(anchors, candidates)?;
            let k = tape.tdist_kernel(d2, tau, eta);
            let all = tape.log_sum_rows(k, None)?;
            let pos = tape.log_sum_rows(k, Some(mask))?;
            tape.sub(all, pos)?
        }
    };
    Ok(tape.mean_all(per_anchor))
}

/// GroupCLIP over both anchor directions, averaged.
#[allow(clippy::too_many_arguments)]
pub fn groupclip_loss_tape(
    tape: &mut Tape,
    z1: NodeId,
    z2: NodeId,
    labels1: &[usize],
    labels2: &[usize],
    kernel: Kernel,
    tau: f64,
    eta: f64,
) -> Result<NodeId> {
    if labels1.is_empty() || labels2.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mask12 = Arc::new(positives_mask(labels1, labels2)?);
    let mask21 = Arc::new(positives_mask(labels2, labels1)?);
    let dir1 = groupclip_direction(tape, z1, z2, mask12, kernel, tau, eta)?;
    let dir2 = groupclip_direction(tape, z2, z1, mask21, kernel, tau, eta)?;
    let sum = tape.add(dir1, dir2)?;
    Ok(tape.scale(sum, 0.5))
}

/// GroupCLIP as a plain value, for evaluation-time loss reporting over
/// full datasets.
pub fn groupclip_loss(
    z1: &Matrix,
    z2: &Matrix,
    labels1: &[usize],
    labels2: &[usize],
    kernel: Kernel,
    tau: f64,
    eta: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(z1.clone());
    let b = tape.constant(z2.clone());
    let loss = groupclip_loss_tape(&mut tape, a, b, labels1, labels2, kernel, tau, eta)?;
    Ok(tape.value(loss).scalar())
}

/// Mean over modalities of the per-sample squared reconstruction error.
pub fn reconstruction_loss_tape(
    tape: &mut Tape,
    pairs: &[(NodeId, NodeId)],
) -> Result<NodeId> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    for &(x, _) in pairs {
        if tape.value(x).rows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
    }
    let mut total: Option<NodeId> = None;
    for &(x, x_hat) in pairs {
        let residual = tape.sub(x_hat, x)?;
        let term = tape.mean_row_sq_norm(residual);
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(tape.scale(total.unwrap(), 1.0 / pairs.len() as f64))
}

/// Reconstruction loss of the model on a pair of eval-mode batches, as a
/// plain value.
pub fn reconstruction_loss(model: &GrooveModel, x: &Matrix, y: &Matrix) -> Result<f64> {
    if x.rows() == 0 || y.rows() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    let zx = model.encode_eval(x, Modality::X)?;
    let zy = model.encode_eval(y, Modality::Y)?;
    let x_hat = model.decode_eval(&zx, Modality::X)?;
    let y_hat = model.decode_eval(&zy, Modality::Y)?;
    let mut tape = Tape::new();
    let pairs = [
        (tape.constant(x.clone()), tape.constant(x_hat)),
        (tape.constant(y.clone()), tape.constant(y_hat)),
    ];
    let loss = reconstruction_loss_tape(&mut tape, &pairs)?;
    Ok(tape.value(loss).scalar())
}

/// One backtranslation direction: generate the cross-modal sample with
/// every component in eval mode and no gradient flow, then re-encode and
/// back-decode in train mode on the tape. Returns the per-sample squared
/// error node against the original batch.
pub fn backtranslation_direction(
    model: &mut GrooveModel,
    tape: &mut Tape,
    ids: &super::ModelIds,
    x: &Matrix,
    source: Modality,
    rng: &mut RngStream,
) -> Result<NodeId> {
    let other = source.other();
    // Generation stage: eval mode, off-tape, so no gradients flow.
    let z = model.encode_eval(x, source)?;
    let generated = model.decode_eval(&z, other)?;
    // Second pass: train mode on the tape.
    let gen_id = tape.constant(generated);
    let z_back = model.encode_train(tape, ids, gen_id, other, rng)?;
    let x_back = model.decode_train(tape, ids, z_back, source)?;
    let x_id = tape.constant(x.clone());
    let residual = tape.sub(x_back, x_id)?;
    Ok(tape.mean_row_sq_norm(residual))
}

/// Full backtranslation loss: both cross-modal samples are generated
/// up front with every component in eval mode (so neither generation sees
/// batch statistics from the other direction's second pass), then both
/// are re-encoded and back-decoded in train mode.
pub fn backtranslation_step(
    model: &mut GrooveModel,
    tape: &mut Tape,
    ids: &super::ModelIds,
    x: &Matrix,
    y: &Matrix,
    rng: &mut RngStream,
) -> Result<NodeId> {
    if x.rows() == 0 || y.rows() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    let gen_y = model.decode_eval(&model.encode_eval(x, Modality::X)?, Modality::Y)?;
    let gen_x = model.decode_eval(&model.encode_eval(y, Modality::Y)?, Modality::X)?;

    let gen_y_id = tape.constant(gen_y);
    let z_back_y = model.encode_train(tape, ids, gen_y_id, Modality::Y, rng)?;
    let x_back = model.decode_train(tape, ids, z_back_y, Modality::X)?;
    let gen_x_id = tape.constant(gen_x);
    let z_back_x = model.encode_train(tape, ids, gen_x_id, Modality::X, rng)?;
    let y_back = model.decode_train(tape, ids, z_back_x, Modality::Y)?;

    let x_id = tape.constant(x.clone());
    let y_id = tape.constant(y.clone());
    let rx = tape.sub(x_back, x_id)?;
    let dir_x = tape.mean_row_sq_norm(rx);
    let ry = tape.sub(y_back, y_id)?;
    let dir_y = tape.mean_row_sq_norm(ry);
    let sum = tape.add(dir_x, dir_y)?;
    Ok(tape.scale(sum, 0.5))
}
